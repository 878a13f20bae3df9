"""Heat and Schrodinger semigroups: eigen oracle, contour formulas, decay fits."""
from dataclasses import dataclass
import math

import numpy as np
from scipy import sparse
from scipy.linalg import eig, eigh, eigh_tridiagonal, inv
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .contours import ContourSpec, contour_nodes, cusp_contains, cusp_distance
from .errors import (ContourCollision, GapTooSmall, InvalidArgument, NearSpectrum,
                     OracleUnavailable, WindowViolation)
from .linalg import ShiftedSolver, circle_moments, power_norm
from .operators import _tridiag_phases
from .resolvent import _as_operator

KINDS = ("heat", "schrodinger")


@dataclass(frozen=True, eq=False)
class SemigroupSample:
    t: float
    value: object
    method: str
    quad_err: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise InvalidArgument("t must be non-negative")

    def norm(self):
        v = self.value
        if np.ndim(v) == 0:
            return float(v)
        return float(np.linalg.norm(v, 2))


@dataclass(frozen=True, eq=False)
class ResidueRecord:
    """Pole contribution e^{-i t nu} sum_j t^j coefficients[j] (Schrodinger convention)."""
    nu: complex
    coefficients: tuple

    def value(self, t):
        acc = 0
        for j, c in enumerate(self.coefficients):
            acc = acc + t ** j * c
        return np.exp(-1j * t * self.nu) * acc


def _exp_factor(kind, t, lam):
    if kind == "heat":
        return np.exp(-t * lam)
    return np.exp(-1j * t * lam)


class EigenOracle:
    """Eigendecomposition H = S diag(lam) S^-1 reused across times and weights."""

    def __init__(self, H, cond_max=1e10):
        H = _as_operator(H)
        self.H = H
        n = H.size
        if H.hermitian_flag:
            tri = H.tridiagonal()
            if tri is not None and n > 2:
                lo, d, up = tri
                if np.iscomplexobj(up) and np.any(up.imag):
                    p = _tridiag_phases(up)
                    lam, S = eigh_tridiagonal(d.real, np.abs(up))
                    S = p[:, None] * S
                else:
                    lam, S = eigh_tridiagonal(d.real, np.real(up))
            else:
                lam, S = eigh(H.dense())
            self.lam, self.S, self.Sinv = lam, S, S.conj().T
            self.cond = 1.0
        else:
            lam, S = eig(H.dense())
            S = S / np.linalg.norm(S, axis=0)
            c = np.linalg.cond(S)
            if not np.isfinite(c) or c > cond_max:
                raise OracleUnavailable(f"eigenvector condition {c:.3g} exceeds {cond_max:.0e}")
            self.lam, self.S, self.Sinv = lam, S, inv(S)
            self.cond = float(c)

    def propagator(self, t, kind="heat"):
        f = _exp_factor(kind, t, self.lam)
        return (self.S * f) @ self.Sinv

    def projector(self, idx):
        idx = np.atleast_1d(idx)
        return self.S[:, idx] @ self.Sinv[idx, :]

    def weighted_norms(self, t_grid, kind="heat", left=None, right=None, tol=1e-8):
        """|| diag(left) e^{-tH} diag(right) || for each t, warm-started power iteration."""
        n = self.H.size
        B = self.S if left is None else np.asarray(left)[:, None] * self.S
        C = self.Sinv if right is None else self.Sinv * np.asarray(right)[None, :]
        if left is not None:
            rows = np.abs(left) > 1e-300
            B = B[rows]
        out, x0 = [], None
        same = left is not None and right is not None and np.array_equal(left, right)
        if self.H.hermitian_flag and kind == "heat" and (same or (left is None and right is None)):
            # w e^{-tH} w is positive semidefinite: its norm is the top eigenvalue
            k = B.shape[0]
            for t in t_grid:
                f = _exp_factor(kind, t, self.lam)
                op = LinearOperator((k, k), matvec=lambda v, f=f: B @ (f * (B.conj().T @ v)),
                                    dtype=B.dtype)
                val, vec = eigsh(op, k=1, which="LA", v0=x0, tol=tol)
                x0 = vec[:, 0]
                out.append(float(val[0]))
            return np.array(out)
        for t in t_grid:
            f = _exp_factor(kind, t, self.lam)

            def mv(X):
                return B @ (f[:, None] * (C @ X))

            def rmv(Y):
                return C.conj().T @ (np.conj(f)[:, None] * (B.conj().T @ Y))

            sig, x0, _ = power_norm(mv, rmv, n, tol=tol, x0=x0)
            out.append(sig)
        return np.array(out)


def propagate_oracle(H, t_grid, kind="heat"):
    """Dense eigen oracle e^{-tH} (heat) or e^{-itH} (schrodinger)."""
    if kind not in KINDS:
        raise InvalidArgument(f"kind must be one of {KINDS}")
    o = EigenOracle(H)
    return [SemigroupSample(t=float(t), value=o.propagator(t, kind), method="oracle") for t in t_grid]


def propagate_midpoint(H, t_grid, kind="heat", local_tol=1e-8):
    """Implicit midpoint stepping from t = 0; step chosen for ``local_tol`` local error."""
    H = _as_operator(H)
    n = H.size
    A = H.sparse().astype(complex)
    if kind == "schrodinger":
        A = 1j * A
    nrm = max(abs(A).sum(axis=1).max(), 1e-300)
    dt_max = (12 * local_tol) ** (1 / 3) / nrm
    I = sparse.identity(n, format="csc", dtype=complex)
    Y = np.eye(n, dtype=complex)
    t_now = 0.0
    out = []
    for t in sorted(t_grid):
        span = t - t_now
        if span > 0:
            steps = int(math.ceil(span / dt_max))
            dt = span / steps
            lu = splu(sparse.csc_matrix(I + 0.5 * dt * A))
            Bm = (I - 0.5 * dt * A).tocsr()
            for _ in range(steps):
                Y = lu.solve(Bm @ Y)
            t_now = t
        out.append(SemigroupSample(t=float(t), value=Y.copy(), method="midpoint",
                                   quad_err=local_tol * span / dt_max if span > 0 else 0.0))
    return out


def propagate(H, t_grid, kind="heat"):
    """Eigen oracle when the eigenbasis is well conditioned, implicit midpoint otherwise."""
    try:
        return propagate_oracle(H, t_grid, kind)
    except OracleUnavailable:
        return propagate_midpoint(H, t_grid, kind)


def _block(n, left, right, support=None):
    wr = np.ones(n) if right is None else np.asarray(right)
    cols = np.flatnonzero(wr) if support is None else support
    B = np.zeros((n, cols.size), dtype=complex)
    B[cols, np.arange(cols.size)] = wr[cols]
    return B, cols


def _contour_sum(H, nodes, t, kind, left, right, rows=None, support=None):
    """(i / 2 pi) sum_k e(t, z_k) dz_k Wl (H - z_k)^-1 Wr for every t at once."""
    n = H.size
    B, cols = _block(n, left, right, support)
    wl = np.ones(n) if left is None else np.asarray(left)
    r = np.arange(n) if rows is None else rows
    t = np.asarray(t, dtype=float)
    acc = np.zeros((t.size, r.size * cols.size), dtype=complex)
    chunk = max(1, min(64, int(4e7 // max(1, r.size * cols.size))))
    for start in range(0, nodes.z.size, chunk):
        zs = nodes.z[start:start + chunk]
        dzs = nodes.dz[start:start + chunk]
        Xs = np.empty((zs.size, r.size * cols.size), dtype=complex)
        for k, z in enumerate(zs):
            try:
                X = ShiftedSolver(H, z).solve(B, refine=False)
            except NearSpectrum:
                raise ContourCollision(f"node z = {z:.6g} hits the spectrum; adjust the contour") from None
            Xs[k] = (wl[r, None] * X[r]).ravel()
        coef = (1j / (2 * np.pi)) * dzs[None, :] * _exp_factor(kind, t[:, None], zs[None, :])
        acc += coef @ Xs
    acc = acc.reshape(t.size, r.size, cols.size)
    return acc


def heat_via_contour(H, t, contour, left=None, right=None, tol=1e-8, max_refine=3,
                     collision_tol=1e-8):
    """e^{-tH} = (i/2 pi) int_Gamma e^{-tz} (H - z)^-1 dz plus residues left of Gamma.

    Eigenvalues of H not enclosed by the cusp get their contribution
    e^{-t lam} Pi_lam added from the dense decomposition.  Panels are doubled
    until the quadrature changes by less than ``tol`` (relative to the largest
    entry); the last change is the reported error estimate.
    """
    H = _as_operator(H)
    if contour.kind != "cusp":
        raise InvalidArgument("heat_via_contour needs a cusp contour")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise InvalidArgument("t must be positive")
    lam, S = np.linalg.eig(H.dense())
    d = cusp_distance(contour, lam)
    if np.any(d <= collision_tol):
        bad = lam[d <= collision_tol]
        raise ContourCollision(f"eigenvalue(s) {bad} within {collision_tol:g} of the cusp; adjust C")
    outside = ~cusp_contains(contour, lam)
    spec = contour
    prev = _contour_sum(H, contour_nodes(spec), t, "heat", left, right)
    err = np.inf
    for _ in range(max_refine):
        spec = spec.refined()
        cur = _contour_sum(H, contour_nodes(spec), t, "heat", left, right)
        err = float(np.abs(cur - prev).max() / max(np.abs(cur).max(), 1e-300))
        prev = cur
        if err <= tol:
            break
    vals = prev
    if np.any(outside):
        Sinv = np.linalg.inv(S)
        n = H.size
        wl = np.ones(n) if left is None else np.asarray(left)
        wr = np.ones(n) if right is None else np.asarray(right)
        cols = np.flatnonzero(wr)
        for k in np.flatnonzero(outside):
            P = np.outer(wl * S[:, k], Sinv[k, cols] * wr[cols])
            vals = vals + np.exp(-t * lam[k])[:, None, None] * P[None]
    return [SemigroupSample(t=float(tk), value=v, method="contour", quad_err=err)
            for tk, v in zip(t, vals)]


def schrodinger_via_contour(H_theta, chi, t, wedge, residues=(), error_estimate=True):
    """chi e^{-itH} chi on the support of chi via the wedge contour.

    The wedge integral collects the spectrum below the rays; poles above
    them are supplied as ResidueRecords (in the compressed basis) and added.
    Returns samples whose value is the |supp chi| x |supp chi| matrix.  The
    error estimate compares with the half-order Gauss rule on the same panels.
    """
    H = _as_operator(H_theta)
    if wedge.kind != "wedge":
        raise InvalidArgument("schrodinger_via_contour needs a wedge contour")
    chi = np.asarray(chi, dtype=float)
    supp = np.flatnonzero(chi)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    nodes = contour_nodes(wedge)
    vals = _contour_sum(H, nodes, t, "schrodinger", chi, chi, rows=supp, support=supp)
    err = np.zeros(t.size)
    if error_estimate and wedge.nodes_per_panel >= 4:
        half = ContourSpec(**{**wedge.__dict__, "node_count": wedge.node_count // 2})
        coarse = _contour_sum(H, contour_nodes(half), t, "schrodinger", chi, chi, rows=supp, support=supp)
        err = np.abs(vals - coarse).max(axis=(1, 2))
    for rec in residues:
        vals = vals + np.array([rec.value(tk) for tk in t])
    return [SemigroupSample(t=float(tk), value=v, method="contour", quad_err=float(e))
            for tk, v, e in zip(t, vals, err)]


@dataclass(frozen=True)
class DecayFit:
    beta_hat: float
    c_hat: float
    beta_expected: float
    window: tuple
    residual: float
    count: int = 0

    def __post_init__(self):
        if not (0 < self.beta_hat <= 1.5):
            raise WindowViolation(f"fitted exponent {self.beta_hat:.4g} outside (0, 1.5]")
        if not self.window[0] <= self.window[1] or not np.isfinite(self.residual):
            raise WindowViolation("empty window or non-finite residual")


def beta_expected(mu):
    return (1.0 - mu) / (1.0 + mu)


def fit_window(t, norms, lambda_min=None, threshold=0.5, box_factor=0.5):
    """(t_min, t_max): first time the norm drops below ``threshold``, and box_factor / lambda_min."""
    t = np.asarray(t, dtype=float)
    norms = np.asarray(norms, dtype=float)
    below = np.flatnonzero(norms < threshold)
    if below.size == 0:
        raise WindowViolation(f"norm never drops below {threshold}")
    t_min = float(t[below[0]])
    t_max = float(t[-1]) if lambda_min is None else min(float(t[-1]), box_factor / lambda_min)
    return t_min, t_max


def decay_fit(t, norms, mu=None, window=None, min_samples=8):
    """Least squares log(-log f) = beta log t + log c over the window."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(norms, dtype=float)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, f = t[m], f[m]
    if t.size < min_samples:
        raise WindowViolation(f"only {t.size} samples in the window, need {min_samples}")
    if np.any(f >= 1) or np.any(f <= 0) or np.any(t <= 0):
        raise WindowViolation("norm values must lie in (0, 1) at positive times inside the window")
    X = np.log(t)
    Y = np.log(-np.log(f))
    A = np.column_stack([X, np.ones_like(X)])
    (b, lc), *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = float(np.max(np.abs(Y - A @ np.array([b, lc]))))
    return DecayFit(beta_hat=float(b), c_hat=float(np.exp(lc)),
                    beta_expected=beta_expected(mu) if mu is not None else float("nan"),
                    window=(float(t[0]), float(t[-1])), residual=res, count=int(t.size))


def spectral_gaps(lam, targets, same_tol=1e-9):
    lam = np.asarray(lam)
    out = []
    for l in np.atleast_1d(targets):
        d = np.abs(lam - l)
        others = d[d > same_tol * max(1.0, abs(l))]
        out.append(others.min() if others.size else np.inf)
    return np.array(out)


def discrete_part(H, lam, t, kind="heat", left=None, right=None, max_order=8, lam_all=None):
    """e^{-tH} Pi_lam (or e^{-itH} Pi_lam) on the weighted block, from circle moments."""
    H = _as_operator(H)
    if lam_all is None:
        lam_all = np.linalg.eigvals(H.dense())
    g = spectral_gaps(lam_all, [lam])[0]
    radius = 0.5 * g if np.isfinite(g) else 1.0
    if radius < 1e-10 * max(1.0, abs(lam)):
        raise GapTooSmall(f"gap around {lam:.6g} is {g:.3g}; Riesz circles would overlap")
    n = H.size
    B, cols = _block(n, left, right)
    wl = np.ones(n) if left is None else np.asarray(left)
    moments, _, _ = circle_moments(lambda z: -ShiftedSolver(H, z).solve(B, refine=False),
                                   lam, radius, orders=max_order)
    moments = [wl[:, None] * M for M in moments]
    scale = max(np.abs(moments[0]).max(), 1e-300)
    t = np.atleast_1d(t)
    out = []
    for tk in t:
        acc = 0
        s = -tk if kind == "heat" else -1j * tk
        for j, M in enumerate(moments):
            if j and np.abs(M).max() <= 1e-12 * scale:
                break
            acc = acc + (s ** j / math.factorial(j)) * M
        out.append(_exp_factor(kind, tk, lam) * acc)
    return out


def subtract_discrete_parts(H, samples, eigenvalue_set, kind="heat", left=None, right=None):
    """Remove sum over eigenvalue_set of e^{-tH} Pi_lam from matrix-valued samples."""
    samples = list(samples)
    if len(eigenvalue_set) == 0:
        return samples
    H = _as_operator(H)
    lam_all = np.linalg.eigvals(H.dense())
    ev = np.asarray(eigenvalue_set, dtype=complex)
    for i in range(ev.size):
        for j in range(i + 1, ev.size):
            if abs(ev[i] - ev[j]) < 1e-10 * max(1.0, abs(ev[i])):
                raise GapTooSmall("two requested eigenvalues coincide; Riesz circles overlap")
    ts = [s.t for s in samples]
    corr = [0] * len(samples)
    for lam in ev:
        parts = discrete_part(H, lam, ts, kind, left, right, lam_all=lam_all)
        corr = [c + p for c, p in zip(corr, parts)]
    return [SemigroupSample(t=s.t, value=s.value - c, method=s.method + "-corrected", quad_err=s.quad_err)
            for s, c in zip(samples, corr)]
