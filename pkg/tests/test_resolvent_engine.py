import numpy as np
import pytest

from threshlab.contours import ContourSpec, contour_nodes
from threshlab.errors import InvalidArgument, NearSpectrum
from threshlab.grid import make_grid
from threshlab.operators import OperatorMatrix, WeightSpec, assemble_hamiltonian
from threshlab.potentials import PotentialSpec, bump, eval_potential, japanese
from threshlab.resolvent import (
    envelope_fit, gevrey_sequence, limiting_absorption_scan, numerical_range_boundary, resolve,
    resolvent_norm, spectral_measure_estimate, threshold_remainder_scan, validity_window,
)

D12 = np.diag([1.0, 2.0])


def model(L=40, pts=801, mu=0.5, c=(1.0, 0, 0, 0, 0), mu_prime=0.5):
    g = make_grid(L, pts)
    return assemble_hamiltonian(g, eval_potential(PotentialSpec(mu=mu, c=c, mu_prime=mu_prime), g))


# resolve / resolvent_norm

def test_resolve_diagonal():
    assert np.allclose(resolve(D12, 0.0, [1.0, 1.0]), [1.0, 0.5])
    assert np.allclose(resolve(D12, 1.5, [1.0, 0.0]), [-2.0, 0.0])


def test_resolve_residual_on_model():
    H = model()
    rng = np.random.default_rng(1)
    b = rng.standard_normal(H.size)
    x = resolve(H, -0.01, b)
    assert np.linalg.norm(H @ x + 0.01 * x - b) <= 1e-10 * np.linalg.norm(b)


def test_resolve_on_eigenvalue():
    with pytest.raises(NearSpectrum) as info:
        resolve(D12, 1.0, [1.0, 1.0])
    assert info.value.z == 1.0


def test_resolvent_norm_diagonal():
    assert resolvent_norm(D12, 0.0) == pytest.approx(1.0, rel=1e-6)
    assert resolvent_norm(D12, 1.5) == pytest.approx(2.0, rel=1e-6)


def test_weighted_norm_against_dense_svd():
    H = model()
    w = WeightSpec("power", s=-1.0)
    val = resolvent_norm(H, -0.01, w, w)
    d = japanese(H.nodes) ** -1.0
    R = np.linalg.inv(H.dense() + 0.01 * np.eye(H.size))
    ref = np.linalg.norm(d[:, None] * R * d[None, :], 2)
    assert val == pytest.approx(ref, rel=1e-4)


# numerical range

def test_numrange_hermitian_diag():
    nr = numerical_range_boundary(np.diag([1.0, 3.0]), 16)
    assert np.all(np.abs(nr.points.imag) < 1e-12)
    assert nr.points.real.min() >= 1 - 1e-12 and nr.points.real.max() <= 3 + 1e-12


def test_numrange_imaginary_diag():
    nr = numerical_range_boundary(np.diag([1j, -1j]), 16)
    assert np.all(np.abs(nr.points.real) < 1e-12)
    assert np.all(np.abs(nr.points.imag) <= 1 + 1e-12)


def test_numrange_nilpotent_against_sampling():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    nr = numerical_range_boundary(N, 64)
    top = np.abs(nr.points).max()
    assert top == pytest.approx(0.5, abs=1e-6)
    rng = np.random.default_rng(0)
    u = rng.standard_normal((2, 200000)) + 1j * rng.standard_normal((2, 200000))
    u /= np.linalg.norm(u, axis=0)
    vals = np.abs(np.einsum("ik,ij,jk->k", u.conj(), N, u))
    assert vals.max() <= top + 1e-9
    assert vals.max() >= top - 1e-3


def test_numrange_points_are_certified():
    H = model(L=20, pts=201, c=(1.0, 1.0, 0, 0, 0))
    nr = numerical_range_boundary(H, 32, keep_vectors=True)
    for k in range(len(nr)):
        u = nr.vectors[:, k]
        assert abs(np.linalg.norm(u) - 1) < 1e-12
        assert abs(np.vdot(u, H.dense() @ u) - nr.points[k]) < 1e-8


def test_numrange_needs_angles():
    with pytest.raises(InvalidArgument):
        numerical_range_boundary(D12, 4)


def test_envelope_examples():
    assert envelope_fit([1.0, 2.0, 3.0], 0.5)[0] == 0.0
    assert envelope_fit([1 + 1j], 0.5)[0] == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        envelope_fit([], 0.5)


def test_envelope_class_v_model_against_sampling():
    H = model(L=20, pts=201, c=(1.0, 1.0, 0, 0, 0), mu_prime=0.4)
    nr = numerical_range_boundary(H, 256)
    C0, min_re = envelope_fit(nr, 0.4)
    assert np.isfinite(C0) and C0 > 0
    assert min_re >= -1e-10
    # smooth random trial vectors stay inside the fitted envelope
    rng = np.random.default_rng(3)
    x = H.nodes
    A = H.dense()
    for _ in range(300):
        c, w = rng.uniform(-15, 15), rng.uniform(0.5, 10)
        u = np.exp(-((x - c) / w) ** 2) * np.exp(1j * rng.uniform(-2, 2) * x)
        u /= np.linalg.norm(u)
        z = np.vdot(u, A @ u)
        assert z.real >= -1e-10
        assert abs(z.imag) <= 1.05 * C0 * z.real ** 0.4


# Gevrey

def test_gevrey_identity():
    s = gevrey_sequence(np.eye(4), np.ones(4), 8, window=False)
    assert np.allclose(s.values, 1.0)
    assert abs(s.gamma_hat) < 1e-10


def test_gevrey_two_by_two_diagonal():
    s = gevrey_sequence(np.diag([1.0, 0.5]), None, 10, window=False)
    assert np.allclose(s.values, 2.0 ** s.N, rtol=1e-12)
    assert abs(s.gamma_hat) < 1e-8
    assert s.C_hat == pytest.approx(2.0, rel=1e-8)


def test_gevrey_diagonal_closed_form():
    d = np.array([1.0, 0.5, 3.0, 0.8])
    X = np.array([1.0, 0.3, 2.0, 0.0])
    s = gevrey_sequence(np.diag(d), X, 12, window=False)
    ref = np.array([np.max(np.abs(X) / d ** N) for N in s.N])
    assert np.allclose(s.values, ref, rtol=1e-10)


def test_validity_window():
    assert validity_window(500, 0.5) == 11
    assert validity_window(500, 0.3) == 49
    assert validity_window(1.0, 0.5) == 0


def test_gevrey_model_upper_bound_and_truncation():
    g = make_grid(500, 2501)
    H = assemble_hamiltonian(g, eval_potential(PotentialSpec(mu=0.5), g))
    chi = bump(g.interior / 2.0)
    with pytest.warns(UserWarning, match="truncated"):
        s = gevrey_sequence(H, chi, 100, mu=0.5, two_sided=True)
    assert s.N_max == 11 and s.warnings
    assert s.gamma_expected == pytest.approx(2.0)
    assert s.gamma_hat <= 2.0 + 0.3


def test_gevrey_empty_window():
    H = model(L=5, pts=51)
    with pytest.raises(InvalidArgument):
        gevrey_sequence(H, np.ones(H.size), 5, mu=0.5)


# contours

def test_segment_weights():
    c = contour_nodes(ContourSpec("segment", node_count=8, panels=2, start=0.0, end=1.0))
    assert len(c) == 8
    assert abs(c.ds.sum() - 1.0) < 1e-10


def test_circle_weights():
    r = 0.7
    c = contour_nodes(ContourSpec("circle", node_count=64, radius=r, center=2.0))
    assert abs(c.ds.sum() - 2 * np.pi * r) < 1e-10
    assert np.allclose(np.abs(c.z - 2.0), r)
    assert abs(c.dz.sum()) < 1e-12
    assert abs(np.sum(c.dz / (c.z - 2.0)) - 2j * np.pi) < 1e-10


def test_cusp_nodes_on_path():
    c = contour_nodes(ContourSpec("cusp", node_count=40, panels=4, C=1.0, mu_prime=0.5, radius=1.0))
    assert len(c) == 40
    assert np.all(np.abs(np.abs(c.z.imag) - c.z.real ** 0.5) < 1e-12)
    assert c.z.real.max() <= 1.0


def test_contour_rejects_bad_counts():
    with pytest.raises(InvalidArgument):
        ContourSpec("cusp", node_count=41)
    with pytest.raises(InvalidArgument):
        ContourSpec("spiral")


# limiting absorption

def test_las_below_spectrum_matches_real_resolvent():
    H = model(L=20, pts=201)
    lam0 = np.linalg.eigvalsh(H.dense())[0]
    lam = lam0 / 2
    scan = limiting_absorption_scan(H, [lam], (1e-1, 1e-2, 1e-3, 1e-4), s=1.0)
    assert scan.converged[0]
    w = japanese(H.nodes) ** -1.0
    ref = np.linalg.norm(w[:, None] * np.linalg.inv(H.dense() - lam * np.eye(H.size)) * w[None, :], 2)
    assert scan.norms[0, -1] == pytest.approx(ref, rel=1e-5)


def test_las_ladder_stabilizes_on_model():
    g = make_grid(2000, 8001)
    H = assemble_hamiltonian(g, eval_potential(PotentialSpec(mu=0.5), g))
    scan = limiting_absorption_scan(H, [0.05, 0.2, 0.5], (3e-2, 1e-2, 3e-3), s=2.0)
    assert np.all(scan.converged)


def test_las_flags_eigenvalue():
    H = model(L=20, pts=201)
    lam = np.linalg.eigvalsh(H.dense())[3]
    scan = limiting_absorption_scan(H, [lam], (1e-1, 1e-2, 1e-3), s=1.0)
    assert not scan.converged[0]


# spectral measure

def test_spectral_measure_at_eigenvalue():
    val = spectral_measure_estimate(OperatorMatrix.from_array(D12), 1.0, 0.1, a=0.0, s=0.0, mu=0.5)
    assert val == pytest.approx(10 / np.pi, rel=1e-6)


def test_spectral_measure_far_below_is_linear_in_eps():
    H = OperatorMatrix.from_array(np.diag([5.0, 6.0]))
    v1 = spectral_measure_estimate(H, 1.0, 1e-2, a=0.0, s=0.0, mu=0.5)
    v2 = spectral_measure_estimate(H, 1.0, 1e-3, a=0.0, s=0.0, mu=0.5)
    assert v1 <= 1e-2 / (np.pi * 16) * (1 + 1e-6)
    assert v1 / v2 == pytest.approx(10.0, rel=1e-3)


def test_spectral_measure_needs_hermitian():
    with pytest.raises(InvalidArgument):
        spectral_measure_estimate(np.diag([1.0, 1j]), 1.0, 0.1, a=0.0, s=0.0, mu=0.5)


# threshold remainder

def test_remainder_order_zero_is_first_resolvent_identity():
    (z, N, val), = threshold_remainder_scan(D12, [-0.1], order=0)
    assert N == 0
    assert val == pytest.approx(0.1 / (1 * 1.1), rel=1e-6)


def test_remainder_order_one_closed_form():
    (z, N, val), = threshold_remainder_scan(D12, [-0.1], order=1)
    # entries z^2 / (d^2 (d - z))
    assert val == pytest.approx(np.max(0.01 / (np.array([1.0, 2.0]) ** 2 * np.array([1.1, 2.1]))), rel=1e-6)


def test_remainder_needs_an_order():
    with pytest.raises(InvalidArgument):
        threshold_remainder_scan(D12, [-0.1])


def test_remainder_scan_on_model_decreasing_convex():
    g = make_grid(500, 2501)
    H = assemble_hamiltonian(g, eval_potential(PotentialSpec(mu=0.5), g))
    chi = bump(g.interior / 2.0)
    with pytest.warns(UserWarning):
        series = gevrey_sequence(H, chi, 100, mu=0.5, two_sided=True)
    zs = [-10.0 ** -k for k in (1, 2, 3, 4)]
    rows = threshold_remainder_scan(H, zs, weight=chi, right_weight=chi, series=series)
    x = np.abs(zs) ** (-1 / series.gamma_expected)
    y = np.log([r[2] for r in rows])
    slopes = np.diff(y) / np.diff(x)
    assert np.all(slopes < 0)
    assert np.all(np.diff(slopes) > 0)
