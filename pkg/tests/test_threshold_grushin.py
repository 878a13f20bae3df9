import numpy as np
import pytest
from scipy.linalg import eig

from threshlab.errors import (BilinearDegenerate, NormalizationImpossible, RadiusCollision,
                              UnsupportedStructure)
from threshlab.grid import make_grid
from threshlab.linalg import numerical_rank
from threshlab.operators import witten_splitting
from threshlab.potentials import WittenSpec, japanese
from threshlab.threshold import (
    LaurentExpansion, bilinear, build_riesz, dual_chain, eigenfunction_decay_check, jordan_chain,
    laurent_expand, normalize_plain, omega_function, pole_convergence, projection_representation_check,
    rank_one_check, riesz_projection,
)

Z_LADDER = -(10.0 ** -np.arange(1, 4.01, 0.5))


@pytest.fixture(scope="module", params=[0.0, 0.3], ids=["real", "complex"])
def witten(request):
    g = make_grid(20, 401)
    split = witten_splitting(WittenSpec(rho=0.5, u2_amplitude=request.param), g)
    K, rd = build_riesz(split.H0, split.W, g.h)
    return g, split, K, rd


# Riesz projection

def test_riesz_diagonal():
    rd = riesz_projection(np.diag([-1.0, 0.5]), radius=0.3)
    assert rd.m == 1
    assert np.allclose(rd.pi1, np.diag([1.0, 0.0]), atol=1e-12)


def test_riesz_jordan_block_is_whole_space():
    rd = riesz_projection(np.array([[-1.0, 1.0], [0.0, -1.0]]), radius=0.3)
    assert rd.m == 2
    assert np.allclose(rd.pi1, np.eye(2), atol=1e-10)


def test_riesz_radius_collision():
    with pytest.raises(RadiusCollision) as info:
        riesz_projection(np.diag([-1.0, -1.3]), radius=0.3)
    r = info.value.suggested_radius
    assert r is not None and 0 < r < 0.3
    assert riesz_projection(np.diag([-1.0, -1.3]), radius=r).m == 1


def test_witten_riesz_against_dense_projection(witten):
    g, split, K, rd = witten
    assert rd.m == 1
    ev, VL, VR = eig(K, left=True, right=True)
    j = int(np.argmin(np.abs(ev + 1)))
    v, w = VR[:, j], VL[:, j]
    P = np.outer(v, w.conj()) / (w.conj() @ v)
    assert np.abs(rd.pi1 - P).max() <= 1e-6 * np.abs(P).max()
    assert np.linalg.norm(rd.pi1 @ rd.pi1 - rd.pi1, 2) <= 1e-8
    assert np.linalg.norm(rd.pi1 @ K - K @ rd.pi1, 2) <= 1e-8
    assert numerical_rank(rd.pi1, 1e-8) == rd.m


def test_kernel_dimension_matches_zero_eigenvalues(witten):
    g, split, K, rd = witten
    n = K.shape[0]
    s = np.linalg.svd(np.eye(n) + K, compute_uv=False)
    ker = int(np.sum(s < 1e-8 * s[0]))
    evH = np.linalg.eigvals(split.H.dense())
    zero = int(np.sum(np.abs(evH) < 1e-8))
    assert ker == zero == 1


# chains

def test_chain_m_one_spans_kernel():
    K = np.diag([-1.0, 0.5, 2.0])
    rd = riesz_projection(K)
    (phi,) = jordan_chain(K, rd)
    assert np.linalg.norm((np.eye(3) + K) @ phi) < 1e-12
    assert abs(abs(phi[0]) - 1) < 1e-10


def test_chain_three_by_three_jordan():
    K = -np.eye(3) + np.diag([1.0, 1.0], 1)
    rd = riesz_projection(K)
    assert rd.m == 3
    phi = jordan_chain(K, rd)
    T = np.eye(3) + K
    assert np.linalg.norm(T @ phi[0]) < 1e-10
    for j in (1, 2):
        assert np.linalg.norm(T @ phi[j] - phi[j - 1]) < 1e-10
    # phi_1 along e1, phi_2 in span(e1, e2) with a non-zero e2 component
    assert np.linalg.norm(phi[0][1:]) < 1e-10 and abs(phi[0][0]) > 0
    assert abs(phi[1][2]) < 1e-10 and abs(phi[1][1]) > 0


def test_chain_rejects_non_simple():
    K = -np.eye(2)
    with pytest.raises(UnsupportedStructure):
        jordan_chain(K, riesz_projection(K))


def test_dual_chain_m_one():
    phi = (np.array([1.0, 2.0, 0.5]),)
    W = np.array([1.0, -0.5, 2.0])
    chis, gram = dual_chain(None, phi, W, 0.1)
    B = bilinear(W, 0.1)
    assert np.allclose(chis[0], phi[0] / B(phi[0], phi[0]))
    assert gram[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_dual_chain_degenerate():
    phi = (np.array([1.0, 1j]),)
    with pytest.raises(BilinearDegenerate):
        dual_chain(None, phi, np.ones(2), 1.0)


def test_synthetic_jordan_duality_and_representation():
    # complex symmetric nilpotent so K is symmetric for B with W = 1
    N = np.array([[1.0, 1j], [1j, -1.0]])
    K = -np.eye(2) + N
    rd = riesz_projection(K)
    assert rd.m == 2
    phi = jordan_chain(K, rd)
    W = np.ones(2)
    chis, gram = dual_chain(K, phi, W, 1.0)
    assert np.allclose(gram, np.eye(2), atol=1e-10)
    assert projection_representation_check(rd, phi, chis, W, 1.0) <= 1e-8


def test_diagonal_representation():
    K = np.diag([-1.0, 0.5])
    W = np.array([2.0, 1.0])
    rd = riesz_projection(K)
    phi = jordan_chain(K, rd)
    chis, _ = dual_chain(K, phi, W, 1.0)
    assert projection_representation_check(rd, phi, chis, W, 1.0) <= 1e-12


def test_witten_chains(witten):
    g, split, K, rd = witten
    n = K.shape[0]
    (phi,) = rd.phi_chain
    assert np.linalg.norm((np.eye(n) + K) @ phi) <= 1e-8 * np.linalg.norm(phi)
    assert abs(rd.gram[0, 0] - 1) <= 1e-10
    assert abs(g.h * np.sum(split.W * phi ** 2)) > 1e-8 * g.h * np.sum(np.abs(split.W * phi ** 2))
    assert projection_representation_check(rd, rd.phi_chain, rd.chi_chain, split.W, g.h) <= 1e-6


def test_witten_j_symmetry(witten):
    g, split, K, rd = witten
    A = split.H.dense()
    assert np.abs(A.conj().T - A.conj()).max() == 0


# omega

def test_omega_first_order(witten):
    g, split, K, rd = witten
    om = omega_function(split.H0, split.W, Z_LADDER, rd, g.h)
    assert om.k == 1
    assert abs(om.omega_k - om.b_m1) <= 1e-4 * abs(om.b_m1)
    assert abs(om.sigma_k + om.b_m1) <= 1e-4 * abs(om.b_m1)
    # omega vanishes exactly where the bordered block is singular: here only at z = 0
    dets = np.array([np.linalg.det(e) for e in om.e_minus_plus])
    assert np.all(np.abs(om.omega) > 0) and np.all(np.abs(dets) > 0)


def test_omega_without_threshold_eigenvalue():
    g = make_grid(20, 401)
    split = witten_splitting(WittenSpec(rho=0.5), g)
    W = 0.9 * split.W
    K, rd = build_riesz(split.H0, W, g.h)
    om = omega_function(split.H0, W, Z_LADDER, rd, g.h)
    assert om.k == 0
    # omega settles on a non-zero limit instead of vanishing linearly in z
    tail = np.abs(om.omega[-3:])
    assert tail.min() > 0.05
    assert (tail.max() - tail.min()) < 0.05 * tail.min()


# Laurent expansion

def test_laurent_scalar_zero():
    ex = laurent_expand(np.zeros((1, 1)), [-1e-1, -1e-2], k=1)
    assert ex.C_minus_1[0, 0] == pytest.approx(-1.0, abs=1e-14)
    assert np.all(ex.remainder < 1e-12)


def test_laurent_double_zero_has_rank_two():
    H = np.diag([0.0, 0.0, 1.0])
    ex = laurent_expand(H, [-1e-1, -1e-2, -1e-3], k=1)
    assert ex.ranks == (2,)
    assert np.allclose(ex.C_minus_1, -np.diag([1.0, 1.0, 0.0]), atol=1e-2)


def test_laurent_second_order_pole():
    # (N - z)^-1 = -I/z - N/z^2 for a nilpotent N
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    ex = laurent_expand(N, [-1e-1, -1e-2, -1e-3], k=2)
    C2, C1 = ex.coefficients
    assert np.allclose(C2, -N, atol=1e-12) and np.allclose(C1, -np.eye(2), atol=1e-12)
    assert ex.ranks == (1, 2)


def test_laurent_selfadjoint_pole_is_minus_projection():
    g = make_grid(20, 401)
    split = witten_splitting(WittenSpec(rho=0.5), g)
    ex = laurent_expand(split.H, -(10.0 ** -np.arange(1, 7)), k=1)
    ev, V = np.linalg.eigh(split.H.dense())
    v = V[:, np.argmin(np.abs(ev))]
    assert np.abs(ex.C_minus_1 + np.outer(v, v)).max() <= 1e-6
    assert ex.ranks == (1,)
    assert rank_one_check(ex, split.kernel, g.h) <= 1e-6


def test_laurent_complex_rank_one():
    g = make_grid(20, 401)
    split = witten_splitting(WittenSpec(rho=0.5, u2_amplitude=0.3), g)
    probe = np.abs(g.nodes) <= 3.0
    ex = laurent_expand(split.H, -(10.0 ** -np.arange(1, 7)), k=1, probe=probe)
    assert ex.ranks == (1,)
    assert rank_one_check(ex, split.kernel, g.h) <= 1e-4


def test_laurent_ladder_clamp_warns():
    with pytest.warns(UserWarning, match="ladder truncated"):
        ex = laurent_expand(np.diag([0.0, 1.0]), -(10.0 ** -np.arange(1, 7)), k=1, min_abs_z=1e-4)
    assert np.abs(ex.z).min() >= 1e-4 and ex.warnings


def test_rank_one_synthetic():
    rng = np.random.default_rng(0)
    h = 0.1
    p = normalize_plain(rng.standard_normal(20) + 0.2j * rng.standard_normal(20), h)
    ex = LaurentExpansion(k=1, coefficients=(-h * np.outer(p, p),), z=np.array([-0.1]),
                          remainder=np.zeros(1), ranks=(1,), probe=np.arange(20))
    assert rank_one_check(ex, p, h) <= 1e-14


def test_normalization_impossible():
    with pytest.raises(NormalizationImpossible):
        normalize_plain(np.array([1.0, 1j]), 1.0)


def test_pole_convergence_first_order():
    g = make_grid(20, 401)
    split = witten_splitting(WittenSpec(rho=0.5), g)
    norms, slope = pole_convergence(split.H, Z_LADDER, np.abs(g.nodes) <= 3.0, split.kernel, g.h)
    assert abs(slope - 1.0) <= 0.15
    assert np.all(np.diff(norms) < 0)


# eigenfunction decay

def test_decay_synthetic():
    x = np.linspace(-200, 200, 2001)
    est = eigenfunction_decay_check(np.exp(-japanese(x) ** 0.5), x, 0.5)
    assert abs(est.alpha - 1.0) <= 1e-3
    assert not est.super_class


def test_decay_witten_kernel():
    g = make_grid(40, 801)
    spec = WittenSpec(rho=0.5)
    est = eigenfunction_decay_check(np.exp(-spec.U(g.nodes)), g.nodes, spec.mu)
    assert est.alpha == pytest.approx(1.0, abs=0.05)
    assert est.residual <= 0.5


def test_decay_gaussian_flagged():
    x = np.linspace(-8, 8, 801)
    est = eigenfunction_decay_check(np.exp(-x ** 2), x, 0.5)
    assert est.super_class
