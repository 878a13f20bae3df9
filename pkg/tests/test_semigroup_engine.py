import math

import numpy as np
import pytest
from scipy.linalg import expm

from threshlab.contours import ContourSpec
from threshlab.errors import (ContourCollision, GapTooSmall, InvalidArgument, OracleUnavailable,
                              WindowViolation)
from threshlab.grid import make_grid
from threshlab.operators import WeightSpec, assemble_hamiltonian, make_witten, weight_vector
from threshlab.potentials import PotentialSpec, WittenSpec, eval_potential
from threshlab.resolvent import envelope_fit, numerical_range_boundary
from threshlab.semigroup import (
    EigenOracle, SemigroupSample, beta_expected, decay_fit, discrete_part, fit_window,
    heat_via_contour, propagate, propagate_midpoint, propagate_oracle, schrodinger_via_contour,
    subtract_discrete_parts,
)
from threshlab.threshold import normalize_plain


def random_hermitian(eigs, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((len(eigs), len(eigs))))
    H = Q @ np.diag(eigs) @ Q.T
    return 0.5 * (H + H.T), Q


# oracle

def test_oracle_identity_at_zero():
    H, _ = random_hermitian([1.0, 2.0, 5.0])
    (s,) = propagate_oracle(H, [0.0])
    assert np.allclose(s.value, np.eye(3), atol=1e-13)


def test_oracle_diagonal_heat_and_schrodinger():
    (s,) = propagate_oracle(np.diag([1.0, 2.0]), [1.0])
    assert np.allclose(s.value, np.diag(np.exp([-1.0, -2.0])), atol=1e-15)
    (s,) = propagate_oracle(np.diag([1.0, 2.0]), [1.0], kind="schrodinger")
    assert np.allclose(s.value, np.diag(np.exp([-1j, -2j])), atol=1e-15)


def test_oracle_matches_expm_non_normal():
    rng = np.random.default_rng(4)
    A = np.diag([1.0, 2.0, 3.0]) + 0.3 * rng.standard_normal((3, 3))
    (s,) = propagate_oracle(A, [0.7])
    assert np.allclose(s.value, expm(-0.7 * A), atol=1e-12)


def test_oracle_unavailable_on_jordan_block_and_fallback():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(OracleUnavailable):
        EigenOracle(N)
    (s,) = propagate(N, [0.5])
    assert s.method == "midpoint"
    assert np.allclose(s.value, np.eye(2) - 0.5 * N, atol=1e-8)


def test_midpoint_matches_expm():
    rng = np.random.default_rng(5)
    A = np.diag([0.5, 1.0, 2.0]) + 0.2 * rng.standard_normal((3, 3))
    out = propagate_midpoint(A, [0.3, 1.0])
    for s in out:
        assert np.allclose(s.value, expm(-s.t * A), atol=1e-7)


def test_sample_rejects_negative_time():
    with pytest.raises(InvalidArgument):
        SemigroupSample(t=-1.0, value=0.0, method="oracle")


def test_weighted_norm_fast_path_matches_dense():
    g = make_grid(20, 201)
    H = assemble_hamiltonian(g, eval_potential(PotentialSpec(mu=0.5), g))
    w = weight_vector(WeightSpec("subexp", a=0.5, mu=0.5), g)
    ts = [0.1, 1.0, 10.0]
    fast = EigenOracle(H).weighted_norms(ts, left=w, right=w)
    ref = [np.linalg.norm(w[:, None] * expm(-t * H.dense()) * w[None, :], 2) for t in ts]
    assert np.allclose(fast, ref, rtol=1e-7)


# heat contour

def test_heat_contour_diagonal():
    spec = ContourSpec.heat_cusp(1.0, 0.5, 1.0, panels=20)
    (s,) = heat_via_contour(np.diag([1.0, 2.0]), [1.0], spec)
    assert np.allclose(s.value, np.diag(np.exp([-1.0, -2.0])), atol=1e-8)


def test_heat_contour_zero_operator():
    spec = ContourSpec.heat_cusp(1.0, 0.5, 0.5, panels=20, center=-1.0)
    out = heat_via_contour(np.zeros((1, 1)), [0.5, 1.0, 4.0], spec)
    for s in out:
        assert abs(s.value[0, 0] - 1.0) < 1e-8


def test_heat_contour_collision():
    spec = ContourSpec.heat_cusp(1.0, 0.5, 0.5)
    with pytest.raises(ContourCollision):
        heat_via_contour(np.zeros((1, 1)), [1.0], spec)


def test_heat_contour_adds_eigenvalues_outside():
    # eigenvalue -1 lies left of the cusp and enters as a residue
    H, _ = random_hermitian([-1.0, 1.0, 2.0], seed=2)
    spec = ContourSpec.heat_cusp(1.0, 0.5, 0.5, panels=20)
    out = heat_via_contour(H, [0.5, 2.0], spec)
    for s in out:
        assert np.allclose(s.value, expm(-s.t * H), atol=1e-8)


def test_heat_contour_model_against_oracle():
    g = make_grid(20, 201)
    spec = PotentialSpec(mu=0.5, mu_prime=0.4, c=(1.0, 1.0, 0, 0, 0))
    H = assemble_hamiltonian(g, eval_potential(spec, g))
    C0, _ = envelope_fit(numerical_range_boundary(H, 128), 0.4)
    w = weight_vector(WeightSpec("subexp", a=1.0, mu=0.5), g)
    ts = np.geomspace(0.1, 50, 6)
    cusp = ContourSpec.heat_cusp(2 * C0, 0.4, 0.1, panels=20)
    out = heat_via_contour(H, ts, cusp, left=w)
    o = EigenOracle(H)
    for s in out:
        ref = w[:, None] * o.propagator(s.t)
        assert np.linalg.norm(s.value - ref, 2) <= 1e-6 * np.linalg.norm(ref, 2)


# Schrodinger contour

def test_schrodinger_zero_operator_gives_chi_squared():
    wedge = ContourSpec.graded_wedge(0.4, 1e5, inner=1e-3, center=0.5j)
    out = schrodinger_via_contour(np.zeros((1, 1)), np.array([0.7]), [0.01, 1.0, 5.0], wedge)
    for s in out:
        assert abs(s.value[0, 0] - 0.49) < 1e-10


@pytest.mark.parametrize("t,tol", [(1e-3, 1e-4), (0.5, 1e-6), (2.0, 1e-6)])
def test_schrodinger_hermitian_against_oracle(t, tol):
    H, _ = random_hermitian([1.0, 1.5, 2.0, 3.0])
    chi = np.array([1.0, 0.5, 0.0, 1.0])
    sup = np.flatnonzero(chi)
    # apex above the real spectrum so that the spectrum sits inside the sector
    wedge = ContourSpec.graded_wedge(1.2, 45 / (t * math.sin(1.2)) + 20, inner=1e-3, center=2 + 10j)
    (s,) = schrodinger_via_contour(H, chi, [t], wedge)
    ref = (chi[:, None] * expm(-1j * t * H) * chi[None, :])[np.ix_(sup, sup)]
    assert np.abs(s.value - ref).max() <= tol * np.abs(ref).max()
    assert s.quad_err < 1e-6


# decay fit

def test_decay_fit_synthetic_stretched():
    t = np.geomspace(0.1, 10, 20)
    fit = decay_fit(t, np.exp(-2 * t ** 0.5))
    assert abs(fit.beta_hat - 0.5) < 1e-10 and abs(fit.c_hat - 2.0) < 1e-10
    assert fit.residual < 1e-10


def test_decay_fit_exponential():
    t = np.geomspace(0.1, 10, 20)
    assert abs(decay_fit(t, np.exp(-t)).beta_hat - 1.0) < 1e-10


def test_decay_fit_rejects_growth_and_short_windows():
    t = np.geomspace(0.1, 10, 20)
    f = np.exp(-t)
    f[5] = 1.2
    with pytest.raises(WindowViolation):
        decay_fit(t, f)
    with pytest.raises(WindowViolation):
        decay_fit(t[:5], np.exp(-t[:5]))


def test_fit_window_rule():
    t = np.linspace(0.1, 10, 100)
    f = np.exp(-t)
    lo, hi = fit_window(t, f, lambda_min=0.1, threshold=0.5, box_factor=0.5)
    assert lo == t[np.flatnonzero(f < 0.5)[0]] and hi == pytest.approx(5.0)
    with pytest.raises(WindowViolation):
        fit_window(t, np.full(100, 0.9))


def test_beta_values():
    assert beta_expected(0.5) == pytest.approx(1 / 3)
    assert beta_expected(0.3) == pytest.approx(0.7 / 1.3)


# discrete parts

def test_subtract_negative_eigenvalue():
    H, Q = random_hermitian([-1.0, 1.0, 2.0], seed=7)
    ts = [1.0, 3.0, 6.0]
    samples = propagate_oracle(H, ts)
    assert samples[-1].norm() == pytest.approx(np.exp(6.0), rel=1e-10)
    corrected = subtract_discrete_parts(H, samples, [-1.0])
    for s in corrected:
        assert s.norm() <= np.exp(-s.t) * (1 + 1e-8)
    norms = [s.norm() for s in corrected]
    assert norms[0] > norms[1] > norms[2]


def test_subtract_empty_set_is_identity():
    H, _ = random_hermitian([1.0, 2.0])
    samples = propagate_oracle(H, [1.0])
    assert subtract_discrete_parts(H, samples, []) == samples


def test_subtract_overlapping_eigenvalues():
    H, _ = random_hermitian([1.0, 2.0])
    with pytest.raises(GapTooSmall):
        subtract_discrete_parts(H, propagate_oracle(H, [1.0]), [1.0, 1.0])


def test_complex_witten_zero_mode_removal():
    g = make_grid(8, 81)
    A, kern = make_witten(WittenSpec(rho=0.5, u2_amplitude=0.3), g)
    h = g.h
    phi0 = normalize_plain(kern, h)
    (P,) = discrete_part(A, 0.0, [0.0])
    # the zero-eigenvalue projection is the rank-one map u -> (h sum phi0 u) phi0
    assert np.abs(P - h * np.outer(phi0, phi0)).max() < 1e-8 * np.abs(P).max()
    ts = [1.0, 10.0, 40.0]
    samples = propagate_oracle(A, ts)
    raw = [s.norm() for s in samples]
    corrected = [s.norm() for s in subtract_discrete_parts(A, samples, [0.0])]
    assert raw[-1] > 0.5
    assert corrected[0] > corrected[1] > corrected[2]
    assert corrected[-1] < 0.1 * raw[-1]
