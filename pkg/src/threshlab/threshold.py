"""Threshold structure of H = H0 + W: Riesz data of K = G0 W, chains, omega, Laurent terms."""
from dataclasses import dataclass
import warnings

import numpy as np
from scipy.linalg import lu_factor, lu_solve, svd

from .errors import (BilinearDegenerate, InvalidArgument, NormalizationImpossible,
                     RadiusCollision, UnsupportedStructure)
from .linalg import ShiftedSolver, circle_moments, numerical_rank
from .potentials import japanese
from .resolvent import _as_operator


@dataclass(frozen=True, eq=False)
class RieszData:
    pi1: np.ndarray
    m: int
    radius: float
    center: complex = -1.0
    phi_chain: tuple = ()
    chi_chain: tuple = ()
    gram: np.ndarray = None
    quad_change: float = 0.0


def coupling_operator(H0, W):
    """K = G0 W = H0^-1 diag(W) as a dense matrix."""
    H0 = _as_operator(H0)
    S = ShiftedSolver(H0, 0.0)
    return S.solve(np.diag(np.asarray(W).astype(complex)))


def riesz_projection(K, center=-1.0, radius=0.3, tol=1e-10):
    """pi = (1/2 pi i) oint_{|z - center| = radius} (z - K)^-1 dz (trapezoid, node doubling)."""
    K = np.asarray(K)
    n = K.shape[0]
    ev = np.linalg.eigvals(K)
    dist = np.abs(np.abs(ev - center) - radius)
    if dist.min() < radius / 10:
        inside = np.sort(np.abs(ev - center))
        near = inside[inside > 1e-12]
        gaps = [0.5 * (a + b) for a, b in zip(near[:-1], near[1:]) if b - a > radius / 5]
        suggestion = gaps[0] if gaps else radius / 2
        raise RadiusCollision(f"an eigenvalue of K lies within {dist.min():.3g} of the circle",
                              suggested_radius=suggestion)
    I = np.eye(n)

    def solve_at(z):
        return lu_solve(lu_factor(z * I - K), I)

    (pi1,), change, _ = circle_moments(solve_at, center, radius, orders=1, tol=tol)
    m = int(round(np.trace(pi1).real))
    return RieszData(pi1=pi1, m=m, radius=float(radius), center=complex(center), quad_change=change)


def jordan_chain(K, riesz, rank_tol=1e-8):
    """phi_j = (1 + K)^(m - j) phi_m, phi_m chosen to maximize the chain bottom."""
    K = np.asarray(K)
    m = riesz.m
    if m < 1:
        raise UnsupportedStructure("-1 is not an eigenvalue of K (m = 0)")
    n = K.shape[0]
    U, s, _ = svd(riesz.pi1)
    Q = U[:, :m]
    T = K + np.eye(n)
    r = numerical_rank(T @ riesz.pi1, rank_tol) if m > 1 else 0
    if r != m - 1:
        raise UnsupportedStructure(f"(1 + K) pi has rank {r}, expected {m - 1}: not a single Jordan block")
    best, phim = -1.0, None
    for q in Q.T:
        v = q
        for _ in range(m - 1):
            v = T @ v
        nv = np.linalg.norm(v)
        if nv > best:
            best, phim = nv, q
    chain = [phim]
    for _ in range(m - 1):
        chain.append(T @ chain[-1])
    chain = chain[::-1]
    return tuple(chain)


def bilinear(W, h):
    W = np.asarray(W)

    def B(f, g):
        return h * np.sum(W * f * g)
    return B


def dual_chain(K, phi_chain, W, h, cond_max=1e10):
    """chi_j in span(phi_1..phi_{m-j+1}) with B(phi_i, chi_j) = delta_ij.

    B(f, g) = h sum W f g without conjugation.  The Gram matrix of the chain
    is Hankel-like; solving against it is the matrix form of the inductive
    construction.
    """
    m = len(phi_chain)
    B = bilinear(W, h)
    G = np.array([[B(pi, pj) for pj in phi_chain] for pi in phi_chain])
    c = np.linalg.cond(G)
    if not np.isfinite(c) or c > cond_max:
        raise BilinearDegenerate(f"Gram matrix of B on the chain has condition {c:.3g}")
    A = np.linalg.solve(G, np.eye(m))
    Phi = np.column_stack(phi_chain)
    chis = tuple(Phi @ A[:, j] for j in range(m))
    gram = np.array([[B(pi, cj) for cj in chis] for pi in phi_chain])
    return chis, gram


def representation_matrix(phi_chain, chi_chain, W, h):
    """sum_j phi_j <., chi_j*> with chi_j* = conj(W chi_j), as a matrix."""
    W = np.asarray(W)
    return sum(np.outer(p, h * W * c) for p, c in zip(phi_chain, chi_chain))


def projection_representation_check(riesz, phi_chain, chi_chain, W, h):
    P = representation_matrix(phi_chain, chi_chain, W, h)
    return float(np.linalg.norm(P - riesz.pi1, 2))


def build_riesz(H0, W, h, radius=0.3):
    """Riesz data of K = G0 W at -1 with Jordan and dual chains."""
    K = coupling_operator(H0, W)
    rd = riesz_projection(K, -1.0, radius)
    phi = jordan_chain(K, rd)
    chi, gram = dual_chain(K, phi, W, h)
    return K, RieszData(pi1=rd.pi1, m=rd.m, radius=rd.radius, center=rd.center,
                        phi_chain=phi, chi_chain=chi, gram=gram, quad_change=rd.quad_change)


@dataclass(frozen=True, eq=False)
class OmegaFunction:
    z: np.ndarray
    omega: np.ndarray
    k: int
    omega_k: complex
    e_minus_plus: np.ndarray
    sigma_k: complex
    b_m1: complex
    plateau_spread: float


def fit_order(z, values, kmax=6, spread_tol=0.05, decades=2.0):
    """Smallest k with log|v(z)| - k log|z| flat (within spread_tol) over the last two decades."""
    z = np.asarray(z)
    v = np.asarray(values)
    az = np.abs(z)
    sel = az <= az.min() * 10 ** decades * (1 + 1e-9)
    if sel.sum() < 2:
        sel = np.argsort(az)[:2]
    best = None
    for k in range(kmax + 1):
        q = v[sel] / z[sel] ** k
        spread = float(np.max(np.abs(q - q[np.argmin(az[sel])])) / max(np.abs(q).max(), 1e-300))
        if spread <= spread_tol:
            return k, spread
        if best is None or spread < best[1]:
            best = (k, spread)
    return best


def _leading_coefficient(z, v, k):
    """Richardson extrapolation of v(z)/z^k to z = 0 from the two smallest samples."""
    z = np.asarray(z)
    order = np.argsort(np.abs(z))
    a, b = order[0], order[1]
    qa, qb = v[a] / z[a] ** k, v[b] / z[b] ** k
    return (qa * z[b] - qb * z[a]) / (z[b] - z[a])


def omega_function(H0, W, z_samples, riesz, h):
    """omega(z) = det of pi(1 + R0(z) W)pi in the (phi, chi*) bases, plus Grushin E_-+.

    The bordered matrix [[1 + R0 W, S], [T, 0]] with S c = sum c_j phi_j and
    T u = (B(chi_i, u))_i is inverted densely; its lower right block is E_-+.
    Also returns b_m1 = <phi_1, J chi_m> = h sum phi_1 chi_m.
    """
    H0 = _as_operator(H0)
    W = np.asarray(W)
    phi, chi = riesz.phi_chain, riesz.chi_chain
    m = len(phi)
    n = H0.size
    Phi = np.column_stack(phi)
    Tm = np.array([h * W * c for c in chi])          # rows: u -> B(chi_i, u)
    omegas, emps = [], []
    for z in z_samples:
        S = ShiftedSolver(H0, z)
        RW = S.solve(np.diag(W.astype(complex)), refine=False)
        A = np.eye(n) + RW
        M = Tm @ (A @ Phi)
        omegas.append(np.linalg.det(M))
        big = np.zeros((n + m, n + m), dtype=complex)
        big[:n, :n] = A
        big[:n, n:] = Phi
        big[n:, :n] = Tm
        E = np.linalg.inv(big)
        emps.append(E[n:, n:])
    z = np.asarray(z_samples, dtype=complex)
    omegas = np.array(omegas)
    emps = np.array(emps)
    k, spread = fit_order(z, omegas)
    wk = _leading_coefficient(z, omegas, k)
    sk = _leading_coefficient(z, np.array([np.linalg.det(e) for e in emps]), k)
    b_m1 = complex(h * np.sum(phi[0] * chi[-1]))
    return OmegaFunction(z=z, omega=omegas, k=k, omega_k=complex(wk), e_minus_plus=emps,
                         sigma_k=complex(sk), b_m1=b_m1, plateau_spread=spread)


@dataclass(frozen=True, eq=False)
class LaurentExpansion:
    k: int
    coefficients: tuple           # C_{-k}, ..., C_{-1} on the probe subspace
    z: np.ndarray
    remainder: np.ndarray
    ranks: tuple
    probe: np.ndarray
    warnings: tuple = ()

    @property
    def C_minus_1(self):
        return self.coefficients[-1]


def laurent_expand(H, z_ladder=None, k=1, probe=None, weight=None, min_abs_z=None, rank_tol=1e-6):
    """Coefficients C_{-k}..C_{-1} of R(z) on the probe subspace from a negative z ladder.

    z^k P R(z) P = C_{-k} + C_{-k+1} z + ... + C_{-1} z^(k-1) + O(z^k); the
    polynomial is fitted through the k + 1 smallest ladder points.
    ``probe`` selects nodes (boolean mask or indices); ``weight`` multiplies
    rows and columns for the remainder norm.
    """
    H = _as_operator(H)
    if z_ladder is None:
        z_ladder = -(10.0 ** -np.arange(1, 7))
    z = np.asarray(z_ladder, dtype=float)
    notes = []
    if min_abs_z is not None and np.any(np.abs(z) < min_abs_z):
        notes.append(f"ladder truncated at |z| >= {min_abs_z:g} (eigenvalue spacing)")
        warnings.warn(notes[-1], stacklevel=2)
        z = z[np.abs(z) >= min_abs_z]
    if z.size < k + 1:
        raise InvalidArgument("ladder too short for the requested order")
    n = H.size
    idx = np.arange(n) if probe is None else (np.flatnonzero(probe) if np.asarray(probe).dtype == bool
                                              else np.asarray(probe))
    w = np.ones(idx.size) if weight is None else np.asarray(weight)[idx]
    E = np.zeros((n, idx.size))
    E[idx, np.arange(idx.size)] = 1.0
    Rs = [ShiftedSolver(H, zz).solve(E)[idx] for zz in z]
    ranked = np.argsort(np.abs(z))

    def fit(order):
        V = np.vander(z[order], k + 1, increasing=True)
        Y = np.array([z[i] ** k * Rs[i] for i in order])
        return np.linalg.solve(V, Y.reshape(k + 1, -1)).reshape(Y.shape)

    coef = fit(ranked[:k + 1])
    Cs = tuple(coef[j] for j in range(k))          # C_{-k} .. C_{-1}
    # a-posteriori fit error: the same fit one ladder point further out
    if z.size > k + 1:
        alt = fit(ranked[1:k + 2])
        err = [np.linalg.norm(alt[j] - coef[j], 2) for j in range(k)]
    else:
        err = [0.0] * k
    rem = []
    for zz, R in zip(z, Rs):
        sing = sum(C * zz ** (-(k - j)) for j, C in enumerate(Cs))
        rem.append(np.linalg.norm(w[:, None] * (R - sing) * w[None, :], 2))
    # singular values below the fit error are not resolved by the ladder
    ranks = tuple(numerical_rank(C, max(rank_tol, 10 * e / max(np.linalg.norm(C, 2), 1e-300)))
                  for C, e in zip(Cs, err))
    return LaurentExpansion(k=k, coefficients=Cs, z=z, remainder=np.array(rem), ranks=ranks,
                            probe=idx, warnings=tuple(notes))


def normalize_plain(phi0, h, tol=1e-12):
    """Scale phi0 so that h sum phi0^2 = 1 (no conjugation)."""
    s = h * np.sum(phi0 * phi0)
    if abs(s) <= tol * h * np.sum(np.abs(phi0) ** 2):
        raise NormalizationImpossible("the plain square integral of phi0 vanishes")
    return phi0 / np.sqrt(s)


def rank_one_check(expansion, phi0, h):
    """|| C_{-1} + <., J phi0> phi0 || / || C_{-1} || on the probe subspace, phi0 plainly normalized."""
    p = normalize_plain(np.asarray(phi0), h)[expansion.probe]
    C = expansion.C_minus_1
    target = -h * np.outer(p, p)
    return float(np.linalg.norm(C - target, 2) / np.linalg.norm(C, 2))


@dataclass(frozen=True)
class DecayEstimate:
    alpha: float
    residual: float
    curvature: float
    super_class: bool
    window: tuple
    warnings: tuple = ()


def eigenfunction_decay_check(u, x, mu, floor=1e-13):
    """Fit log|u| = -alpha <x>^(1-mu) + c on the outer half |x| >= max|x|/2."""
    u = np.abs(np.asarray(u))
    x = np.abs(np.asarray(getattr(x, "interior", x), dtype=float))
    notes = []
    outer = x >= 0.5 * x.max()
    ok = outer & (u > floor * u.max())
    if ok.sum() < outer.sum():
        notes.append("values at machine zero removed from the fit window")
        warnings.warn(notes[-1], stacklevel=2)
    if ok.sum() < 5:
        raise InvalidArgument("too few usable points on the outer half")
    xi = japanese(x[ok]) ** (1 - mu)
    y = np.log(u[ok])
    A = np.column_stack([xi, np.ones_like(xi)])
    (b, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ np.array([b, c])
    s = (xi - xi.mean()) / max(np.ptp(xi), 1e-300)
    curv = float(np.polyfit(s, y / max(np.abs(y).max(), 1e-300), 2)[0])
    return DecayEstimate(alpha=float(-b), residual=float(np.abs(res).max()), curvature=curv,
                         super_class=curv < -1e-3, window=(float(x[ok].min()), float(x[ok].max())),
                         warnings=tuple(notes))


def pole_convergence(H, z_ladder, probe, phi0, h):
    """|| P (z R(z) + Pi0) P || along the ladder and the fitted log-log slope.

    Pi0 u = phi0 h sum(u phi0) with phi0 plainly normalized, which is the
    orthogonal projection onto phi0 when phi0 is real.
    """
    H = _as_operator(H)
    z = np.asarray(z_ladder, dtype=float)
    idx = np.flatnonzero(probe) if np.asarray(probe).dtype == bool else np.asarray(probe)
    p = normalize_plain(np.asarray(phi0), h)
    Pi = h * np.outer(p[idx], p[idx])
    E = np.zeros((H.size, idx.size))
    E[idx, np.arange(idx.size)] = 1.0
    norms = np.array([np.linalg.norm(zz * ShiftedSolver(H, zz).solve(E)[idx] + Pi, 2) for zz in z])
    slope = float(np.polyfit(np.log(np.abs(z)), np.log(norms), 1)[0])
    return norms, slope
