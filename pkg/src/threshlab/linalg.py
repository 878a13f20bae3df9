"""Factorized shifted solves, power-iteration norms and small eigen helpers."""
import warnings

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, qr, eigh, svd
from scipy.sparse.linalg import splu, eigs, LinearOperator

from .errors import NearSpectrum

PIVOT_TOL = 1e-14


class ShiftedSolver:
    """LU factorization of H - z I with solves for (H - z)^-1 and its adjoint."""

    def __init__(self, H, z=0.0):
        self.H = H
        self.z = complex(z)
        self.n = H.size
        shift = self.z if self.z.imag else self.z.real
        A = H.shifted(shift)
        self.A = A
        if sparse.issparse(A):
            tri = H.tridiagonal() is not None
            try:
                self._lu = splu(sparse.csc_matrix(A), permc_spec="NATURAL" if tri else "COLAMD")
            except RuntimeError as exc:
                raise NearSpectrum(z, f"factorization of H - z failed at z = {z!r}: {exc}") from None
            udiag = self._lu.U.diagonal()
            self._sparse = True
        else:
            with warnings.catch_warnings():
                # an exactly singular shift is reported below as NearSpectrum
                warnings.simplefilter("ignore", LinAlgWarning)
                lu, piv = lu_factor(A, check_finite=True)
            self._lu = (lu, piv)
            udiag = np.diag(lu)
            self._sparse = False
        self.real = not np.iscomplexobj(A)
        big = max(1.0, float(np.abs(udiag).max()))
        if not np.all(np.isfinite(udiag)) or np.abs(udiag).min() <= PIVOT_TOL * big:
            raise NearSpectrum(z)

    def _raw(self, b, trans):
        if self.real and np.iscomplexobj(b):
            return self._raw(b.real, trans) + 1j * self._raw(b.imag, trans)
        if self._sparse:
            t = {"N": "N", "T": "T", "H": "H"}[trans]
            if self.real and t == "H":
                t = "T"
            return self._lu.solve(np.ascontiguousarray(b), trans=t)
        code = {"N": 0, "T": 1, "H": 2}[trans]
        return lu_solve(self._lu, b, trans=code)

    def solve(self, b, refine=True):
        """(H - z)^-1 b with one step of iterative refinement."""
        b = np.asarray(b)
        x = self._raw(b, "N")
        if refine:
            x = x + self._raw(b - self.A @ x, "N")
        return x

    def solve_adjoint(self, b, refine=False):
        """(H - z)^-* b."""
        b = np.asarray(b)
        x = self._raw(b, "H")
        if refine:
            AH = self.A.conj().T
            x = x + self._raw(b - AH @ x, "H")
        return x

    def solve_transpose(self, b):
        return self._raw(np.asarray(b), "T")


def power_norm(matvec, rmatvec, n, tol=1e-6, maxiter=500, block=4, seed=0, dtype=complex, x0=None):
    """Largest singular value of a linear map by block power iteration.

    Subspace iteration on A^* A with a Rayleigh-Ritz step; stops once the
    top Ritz pair residual is below ``tol`` relative to the Ritz value.
    Returns (sigma, right_vector, iterations).
    """
    rng = np.random.default_rng(seed)
    b = max(1, min(block, n))
    X = rng.standard_normal((n, b))
    if np.dtype(dtype).kind == "c":
        X = X + 1j * rng.standard_normal((n, b))
    if x0 is not None:
        x0 = np.asarray(x0).reshape(n, -1)[:, :b]
        X[:, :x0.shape[1]] = x0
    X, _ = qr(X, mode="economic")
    theta = 0.0
    v = X[:, 0]
    for it in range(1, maxiter + 1):
        Y = matvec(X)
        Z = rmatvec(Y)
        G = X.conj().T @ Z
        G = 0.5 * (G + G.conj().T)
        w, c = eigh(G)
        theta = max(w[-1], 0.0)
        v = X @ c[:, -1]
        r = Z @ c[:, -1] - theta * v
        if b == n or np.linalg.norm(r) <= tol * theta or theta == 0.0:
            break
        X, _ = qr(Z, mode="economic")
    return float(np.sqrt(theta)), v, it


def weighted_resolvent_norm(H, z, left=None, right=None, tol=1e-6, maxiter=500, seed=0, solver=None):
    """|| diag(left) (H - z)^-1 diag(right) ||_2."""
    S = solver or ShiftedSolver(H, z)
    n = H.size
    wl = np.ones(n) if left is None else np.asarray(left)
    wr = np.ones(n) if right is None else np.asarray(right)

    def mv(X):
        return wl[:, None] * S.solve(wr[:, None] * X, refine=False)

    def rmv(Y):
        return np.conj(wr)[:, None] * S.solve_adjoint(np.conj(wl)[:, None] * Y)

    return power_norm(mv, rmv, n, tol=tol, maxiter=maxiter, seed=seed)[0]


def dense_norm(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(svd(a, compute_uv=False)[0])


def numerical_rank(a, rel=1e-6):
    s = svd(np.atleast_2d(a), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel * s[0]))


def eigs_near(H, sigma, k=12, seed=0, dense_limit=1200):
    """Eigenvalues (and right eigenvectors) of H closest to ``sigma``.

    Dense LAPACK below ``dense_limit`` unknowns, shift-invert Arnoldi above.
    """
    n = H.size
    if n <= dense_limit:
        w, V = np.linalg.eig(H.dense())
        idx = np.argsort(np.abs(w - sigma))[:k]
        return w[idx], V[:, idx]
    S = ShiftedSolver(H, sigma)
    op = LinearOperator((n, n), matvec=lambda v: S.solve(v.astype(complex), refine=False), dtype=complex)
    v0 = np.random.default_rng(seed).standard_normal(n) + 0j
    mu, V = eigs(op, k=min(k, n - 2), which="LM", v0=v0, tol=1e-13, maxiter=20 * n)
    w = sigma + 1.0 / mu
    idx = np.argsort(np.abs(w - sigma))
    return w[idx], V[:, idx]


def circle_moments(solve_at, center, radius, orders=1, tol=1e-10, start=16, max_nodes=4096):
    """Moments (1/2 pi i) oint (z - center)^j (z - H)^-1 dz, j < ``orders``, on a circle.

    ``solve_at(z)`` returns (z - H)^-1 applied to a fixed block.  Trapezoid
    rule; nodes are doubled (keeping the old ones) until every moment changes
    by at most ``tol`` relative to max(1, |moment|).  Returns
    (list of moments, last change, node count).
    """
    def node_sum(m, offset):
        acc = [0] * orders
        for j in range(m):
            e = np.exp(2j * np.pi * (j + offset) / m)
            X = solve_at(center + radius * e)
            for k in range(orders):
                acc[k] = acc[k] + (radius * e) ** (k + 1) * X
        return acc

    m = start
    total = node_sum(m, 0.0)
    vals = [t / m for t in total]
    change = np.inf
    while m < max_nodes:
        extra = node_sum(m, 0.5)
        total = [a + b for a, b in zip(total, extra)]
        m *= 2
        new = [t / m for t in total]
        change = max(float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(a))))
                     for a, b in zip(new, vals))
        vals = new
        if change <= tol:
            break
    return vals, change, m
