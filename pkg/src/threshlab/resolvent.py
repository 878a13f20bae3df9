"""Resolvent solves, weighted norms, numerical range, Gevrey sequences and scans."""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal, svd

from .errors import InvalidArgument, NearSpectrum, LabError
from .linalg import ShiftedSolver, power_norm, weighted_resolvent_norm
from .operators import OperatorMatrix, WeightSpec, weight_vector, _tridiag_phases
from .potentials import japanese


def _as_operator(H):
    if isinstance(H, OperatorMatrix):
        return H
    return OperatorMatrix.from_array(H)


def _weights(H, w):
    if w is None:
        return None
    if isinstance(w, WeightSpec):
        return weight_vector(w, H.nodes)
    w = np.asarray(w)
    if w.shape != (H.size,):
        raise InvalidArgument("weight vector does not match the operator size")
    return w


def resolve(H, z, rhs):
    """(H - z)^-1 rhs with one refinement step; residual checked against 1e-10."""
    H = _as_operator(H)
    S = ShiftedSolver(H, z)
    rhs = np.asarray(rhs)
    x = S.solve(rhs)
    res = np.linalg.norm(S.A @ x - rhs)
    if res > 1e-10 * np.linalg.norm(rhs):
        x = S.solve(rhs - S.A @ x, refine=False) + x
        res = np.linalg.norm(S.A @ x - rhs)
        if res > 1e-10 * np.linalg.norm(rhs):
            raise NearSpectrum(z, f"residual {res:.3g} after refinement; z is too close to the spectrum")
    return x


def resolvent_norm(H, z, left_weight=None, right_weight=None, tol=1e-6, maxiter=500, seed=0):
    """|| W_l (H - z)^-1 W_r || by power iteration on factorized solves."""
    H = _as_operator(H)
    return weighted_resolvent_norm(H, z, _weights(H, left_weight), _weights(H, right_weight),
                                   tol=tol, maxiter=maxiter, seed=seed)


@dataclass(frozen=True, eq=False)
class NumericalRange:
    theta: np.ndarray
    points: np.ndarray
    vectors: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.points.size


def _top_hermitian_vector(H, phase):
    tri = H.tridiagonal()
    n = H.size
    if tri is not None and n > 2:
        lo, d, up = tri
        dd = np.real(phase * d)
        e = 0.5 * (phase * up + np.conj(phase * lo))
        if np.iscomplexobj(e) and np.any(np.abs(e.imag) > 0):
            p = _tridiag_phases(e)
            _, v = eigh_tridiagonal(dd, np.abs(e), select="i", select_range=(n - 1, n - 1))
            return p * v[:, 0]
        _, v = eigh_tridiagonal(dd, np.real(e), select="i", select_range=(n - 1, n - 1))
        return v[:, 0].astype(complex)
    A = phase * H.dense()
    _, v = eigh(0.5 * (A + A.conj().T), subset_by_index=[n - 1, n - 1])
    return v[:, 0]


def numerical_range_boundary(H, angle_count=64, keep_vectors=False):
    """Boundary of the field of values by supporting hyperplanes.

    For each angle t the top eigenvector u of the Hermitian part of
    e^{i t} H gives the boundary point <u, H u> / <u, u>, extreme in the
    direction e^{-i t}.
    """
    if angle_count < 8:
        raise InvalidArgument("need at least 8 angles")
    H = _as_operator(H)
    thetas = 2 * np.pi * np.arange(angle_count) / angle_count
    pts = np.empty(angle_count, dtype=complex)
    vecs = [] if keep_vectors else None
    for k, t in enumerate(thetas):
        u = _top_hermitian_vector(H, np.exp(1j * t))
        u = u / np.linalg.norm(u)
        pts[k] = np.vdot(u, H @ u)
        if keep_vectors:
            vecs.append(u)
    return NumericalRange(theta=thetas, points=pts,
                          vectors=np.array(vecs).T if keep_vectors else None)


def envelope_fit(points, mu_prime, re_floor=1e-14):
    """(C0, min Re z) with C0 = max |Im z| / (Re z)^mu' over points with Re z > re_floor."""
    pts = np.asarray(getattr(points, "points", points), dtype=complex).ravel()
    if pts.size == 0:
        raise InvalidArgument("no points to fit")
    pos = pts[pts.real > re_floor]
    C0 = float(np.max(np.abs(pos.imag) / pos.real ** mu_prime)) if pos.size else 0.0
    return C0, float(pts.real.min())


def validity_window(L, mu, M=4.0):
    """Largest N with M <(2N - 1) mu>^(1/(1 - mu)) <= L (0 if none)."""
    N = 0
    while M * float(japanese((2 * (N + 1) - 1) * mu)) ** (1.0 / (1.0 - mu)) <= L:
        N += 1
        if N > 10000:
            break
    return N


def gevrey_fit(N, log_values):
    """Least squares log w_N = g N log N + (log C) N + const; returns (g, log C)."""
    N = np.asarray(N, dtype=float)
    y = np.asarray(log_values, dtype=float)
    if N.size < 3:
        return float("nan"), float("nan")
    X = np.column_stack([N * np.log(N), N, np.ones_like(N)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0]), float(coef[1])


@dataclass(frozen=True, eq=False)
class GevreySeries:
    mu: float
    gamma_expected: float
    N_max: int
    weight: str
    N: np.ndarray
    log_values: np.ndarray
    gamma_hat: float
    log_C: float
    running_gamma: np.ndarray
    warnings: tuple = ()

    @property
    def values(self):
        return np.exp(self.log_values)

    @property
    def C_hat(self):
        return math.exp(self.log_C)


def gevrey_sequence(H0, weight, N_max, mu=None, M=4.0, two_sided=False, window=True):
    """w_N = || X G0^N || (or || X G0^N X || when ``two_sided``) for N = 1..N_max.

    ``weight`` is a WeightSpec or a node vector (a cutoff).  The adjoint
    powers are applied to the columns of X on its support, then the norm of
    the resulting tall block is taken; logs are accumulated with per-step
    normalization so large powers do not overflow.
    """
    H0 = _as_operator(H0)
    notes = []
    if window:
        if mu is None or H0.grid is None:
            raise InvalidArgument("the validity window needs mu and a grid")
        Nw = validity_window(H0.grid.L, mu, M)
        if N_max > Nw:
            notes.append(f"N_max {N_max} truncated to validity window {Nw}")
            warnings.warn(notes[-1], stacklevel=2)
            N_max = Nw
    if N_max < 1:
        raise InvalidArgument("validity window is empty; enlarge L")
    X = _weights(H0, weight)
    if X is None:
        X = np.ones(H0.size)
    supp = np.flatnonzero(X)
    S = ShiftedSolver(H0, 0.0)
    # columns of (G0^*)^N X restricted to supp: B has shape n x |supp|
    B = np.zeros((H0.size, supp.size), dtype=complex)
    B[supp, np.arange(supp.size)] = np.conj(X[supp])
    logs = []
    acc = 0.0
    for N in range(1, N_max + 1):
        B = S.solve_adjoint(B)
        scale = np.abs(B).max()
        B = B / scale
        acc += math.log(scale)
        blk = B[supp] * X[supp, None].conj() if two_sided else B
        s = svd(blk, compute_uv=False)[0]
        logs.append(acc + math.log(s))
    Ns = np.arange(1, N_max + 1)
    logs = np.array(logs)
    g, lc = gevrey_fit(Ns, logs)
    running = np.array([gevrey_fit(Ns[:k], logs[:k])[0] for k in range(1, N_max + 1)])
    gamma = 2 * mu / (1 - mu) if mu is not None else float("nan")
    label = weight.kind if isinstance(weight, WeightSpec) else "cutoff"
    return GevreySeries(mu=mu, gamma_expected=gamma, N_max=N_max, weight=label, N=Ns,
                        log_values=logs, gamma_hat=g, log_C=lc, running_gamma=running,
                        warnings=tuple(notes))


@dataclass(frozen=True, eq=False)
class LASScan:
    lambdas: np.ndarray
    eps: np.ndarray
    norms: np.ndarray          # shape (len(lambdas), len(eps)); nan where the solve failed
    converged: np.ndarray      # per lambda
    errors: dict

    def rows(self):
        for i, lam in enumerate(self.lambdas):
            for j, e in enumerate(self.eps):
                yield lam, e, self.norms[i, j]


def limiting_absorption_scan(H, lambdas, eps_ladder=(1e-1, 1e-2, 1e-3, 1e-4), s=1.0,
                             rel_change=0.05, sign=1, tol=1e-6, seed=0):
    """|| <x>^-s R(lambda + sign i eps) <x>^-s || along a decreasing epsilon ladder.

    A lambda is flagged as non-convergent when two successive ladder values
    differ by more than ``rel_change``.
    """
    H = _as_operator(H)
    w = japanese(H.nodes) ** (-s)
    lambdas = np.asarray(lambdas, dtype=float)
    eps = np.asarray(eps_ladder, dtype=float)
    norms = np.full((lambdas.size, eps.size), np.nan)
    errors = {}
    for i, lam in enumerate(lambdas):
        for j, e in enumerate(eps):
            try:
                norms[i, j] = weighted_resolvent_norm(H, lam + sign * 1j * e, w, w, tol=tol, seed=seed)
            except LabError as exc:
                errors[(float(lam), float(e))] = str(exc)
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.abs(np.diff(norms, axis=1)) / np.minimum(norms[:, 1:], norms[:, :-1])
    conv = np.all(ch <= rel_change, axis=1) & np.all(np.isfinite(norms), axis=1)
    return LASScan(lambdas=lambdas, eps=eps, norms=norms, converged=conv, errors=errors)


def spectral_measure_estimate(H0, lam, eps, a, s, mu, tol=1e-6, seed=0):
    """|| e^{-a <x>^(1-mu)} (R(lam + i eps) - R(lam - i eps)) / (2 pi i) <x>^-s ||.

    For Hermitian H0 the middle factor is (eps/pi) R(lam - i eps) R(lam + i eps),
    applied with one complex factorization.
    """
    H0 = _as_operator(H0)
    if not H0.hermitian_flag:
        raise InvalidArgument("spectral_measure_estimate needs a Hermitian operator")
    if lam <= 0 or eps <= 0:
        raise InvalidArgument("need lambda > 0 and eps > 0")
    x = H0.nodes
    wl = np.exp(-a * japanese(x) ** (1 - mu))
    wr = japanese(x) ** (-s)
    S = ShiftedSolver(H0, lam + 1j * eps)
    c = eps / np.pi

    def middle(B):
        return c * S.solve_adjoint(S.solve(B, refine=False))

    def mv(X):
        return wl[:, None] * middle(wr[:, None] * X)

    def rmv(Y):
        return wr[:, None] * middle(wl[:, None] * Y)

    return power_norm(mv, rmv, H0.size, tol=tol, seed=seed)[0]


def remainder_order(z, kappa, gamma, N_max):
    N = int(math.floor(kappa * abs(z) ** (-1.0 / gamma)))
    return max(0, min(N, N_max))


def threshold_remainder_scan(H, z_samples, kappa=None, gamma=None, N_max=None, weight=None,
                             right_weight=None, order=None, tol=1e-6, seed=0, series=None):
    """|| X (R(z) - sum_{j<=N} z^j G0^(j+1)) || for each sample z.

    The remainder equals z^(N+1) G0^(N+1) R(z) exactly (resolvent identity),
    which is what is applied so that tiny remainders are not lost to
    cancellation.  N is ``order`` if given, else floor(kappa |z|^(-1/gamma))
    clamped to [0, N_max].  With a GevreySeries, gamma, N_max and the default
    kappa = 0.5 / C_hat^(1/gamma) are taken from it.
    """
    H = _as_operator(H)
    if series is not None:
        gamma = series.gamma_expected if gamma is None else gamma
        N_max = series.N_max if N_max is None else N_max
        if kappa is None:
            kappa = 0.5 / series.C_hat ** (1.0 / gamma)
    if order is None and (kappa is None or gamma is None or N_max is None):
        raise InvalidArgument("need either a fixed order or kappa, gamma and N_max")
    wl = _weights(H, weight)
    wr = _weights(H, right_weight)
    n = H.size
    wl = np.ones(n) if wl is None else wl
    wr = np.ones(n) if wr is None else wr
    G = ShiftedSolver(H, 0.0)
    out = []
    for z in z_samples:
        z = complex(z)
        N = order if order is not None else remainder_order(z, kappa, gamma, N_max)
        Rz = ShiftedSolver(H, z)

        def mv(X, N=N, Rz=Rz):
            Y = Rz.solve(wr[:, None] * X, refine=False)
            for _ in range(N + 1):
                Y = G.solve(Y, refine=False)
            return wl[:, None] * Y

        def rmv(Y, N=N, Rz=Rz):
            Y = np.conj(wl)[:, None] * Y
            for _ in range(N + 1):
                Y = G.solve_adjoint(Y)
            return np.conj(wr)[:, None] * Rz.solve_adjoint(Y)

        sig = power_norm(mv, rmv, n, tol=tol, seed=seed)[0]
        out.append((z, N, abs(z) ** (N + 1) * sig))
    return out
