"""Assembly of discretized operators, weights and the quadratic-form checks."""
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from .errors import InvalidArgument, PotentialOverflow
from .grid import Grid
from .potentials import japanese, smoothstep


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """A discretized operator.

    ``entries`` is kept sparse (CSR) when the stencil is banded and dense
    otherwise; ``dense()`` always returns an ndarray.  ``nodes`` are the
    coordinates of the unknowns, ``kinetic`` the positive Laplacian part used
    for the discrete gradient norm.
    """
    entries: object
    grid: Grid = None
    hermitian_flag: bool = False
    label: str = ""
    nodes: np.ndarray = field(default=None, repr=False)
    kinetic: object = field(default=None, repr=False)

    def __post_init__(self):
        e = self.entries
        if not sparse.issparse(e):
            e = np.asarray(e)
            if e.ndim != 2 or e.shape[0] != e.shape[1]:
                raise InvalidArgument("operator entries must form a square matrix")
        else:
            e = sparse.csr_matrix(e)
        object.__setattr__(self, "entries", e)
        if self.nodes is None:
            nodes = self.grid.interior if self.grid is not None else np.arange(e.shape[0], dtype=float)
            object.__setattr__(self, "nodes", nodes)
        if len(self.nodes) != e.shape[0]:
            raise InvalidArgument("node count does not match the matrix dimension")
        if self.hermitian_flag:
            dev = abs(e - e.conj().T).max() if sparse.issparse(e) else np.abs(e - e.conj().T).max()
            if dev > 1e-12:
                raise InvalidArgument(f"hermitian flag set but |A - A*|_max = {dev:.3g}")

    @classmethod
    def from_array(cls, a, label="", hermitian=None):
        a = np.asarray(a)
        if a.ndim == 1:
            a = np.diag(a)
        if hermitian is None:
            hermitian = bool(np.abs(a - a.conj().T).max() <= 1e-12)
        return cls(entries=a, hermitian_flag=hermitian, label=label)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def size(self):
        return self.entries.shape[0]

    @property
    def is_sparse(self):
        return sparse.issparse(self.entries)

    @property
    def dtype(self):
        return self.entries.dtype

    def dense(self):
        if self.is_sparse:
            return self.entries.toarray()
        return np.array(self.entries)

    def sparse(self):
        return sparse.csr_matrix(self.entries)

    def tridiagonal(self):
        """(sub, diag, sup) if the matrix is tridiagonal, else None."""
        a = sparse.coo_matrix(self.entries)
        if a.nnz and np.abs(a.row - a.col).max() > 1:
            return None
        a = sparse.dia_matrix(self.entries)
        return a.diagonal(-1), a.diagonal(0), a.diagonal(1)

    def matvec(self, v):
        return self.entries @ v

    def __matmul__(self, v):
        return self.entries @ v

    def shifted(self, z):
        """Entries of A - z I in the native storage."""
        if self.is_sparse:
            return (self.entries - z * sparse.identity(self.size, format="csr")).tocsc()
        return self.entries - z * np.eye(self.size)

    def scaled(self, s, label=None):
        kin = None if self.kinetic is None else self.kinetic
        herm = self.hermitian_flag and np.isreal(s)
        return OperatorMatrix(entries=self.entries * s, grid=self.grid, hermitian_flag=herm,
                              label=label or self.label, nodes=self.nodes, kinetic=kin)


def laplacian(grid):
    """Positive discrete Laplacian on the unknowns of ``grid`` (Dirichlet walls).

    Radial grids act on u = r^((n-1)/2) v: an odd ghost at the origin (first
    diagonal entry 3/h^2), a Dirichlet ghost half a cell beyond the last node
    and the centrifugal term (n-1)(n-3)/(4 r^2).
    """
    h = grid.h
    m = grid.interior_count
    d = np.full(m, 2.0 / h ** 2)
    off = np.full(m - 1, -1.0 / h ** 2)
    if grid.radial:
        d[0] = 3.0 / h ** 2
        r = grid.nodes
        d = d + (grid.n - 1) * (grid.n - 3) / (4.0 * r * r)
    return sparse.diags([off, d, off], [-1, 0, 1], format="csr")


def neumann_laplacian(npts, h):
    """Natural-boundary Laplacian on all nodes: 1/h^2 at the ends, 2/h^2 inside."""
    d = np.full(npts, 2.0 / h ** 2)
    d[0] = d[-1] = 1.0 / h ** 2
    off = np.full(npts - 1, -1.0 / h ** 2)
    return sparse.diags([off, d, off], [-1, 0, 1], format="csr")


def assemble_hamiltonian(grid, potential, boundary="dirichlet", label="H"):
    """-Delta + V on ``grid``.

    ``potential`` is either a tuple (V1, V2, W) of real node vectors, giving
    V = V1 - i V2 + W, or a single (possibly complex) node vector.
    """
    if boundary != "dirichlet":
        raise InvalidArgument(f"unsupported boundary {boundary!r}")
    m = grid.interior_count
    if isinstance(potential, tuple):
        if len(potential) != 3:
            raise InvalidArgument("expected (V1, V2, W)")
        V1, V2, W = (np.asarray(v) for v in potential)
        for v in (V1, V2, W):
            if v.shape != (m,):
                raise InvalidArgument(f"potential vector of shape {v.shape}, grid has {m} unknowns")
        real_inputs = all(np.isrealobj(v) for v in (V1, V2, W))
        herm = real_inputs and not np.any(V2 != 0)
        V = V1 - 1j * V2 + W
        if herm:
            V = V.real
    else:
        V = np.asarray(potential)
        if V.shape != (m,):
            raise InvalidArgument(f"potential vector of shape {V.shape}, grid has {m} unknowns")
        herm = bool(np.isrealobj(V) or not np.any(V.imag))
        if herm:
            V = V.real
    K = laplacian(grid)
    A = K + sparse.diags(V, 0, format="csr")
    return OperatorMatrix(entries=A, grid=grid, hermitian_flag=bool(herm), label=label,
                          nodes=grid.interior, kinetic=K)


def _witten_bonds(U, h):
    Ub = 0.5 * (U[1:] + U[:-1])
    left = -np.exp(U[:-1] - Ub) / h
    right = np.exp(U[1:] - Ub) / h
    return left, right


def make_witten(spec, grid):
    """Witten Laplacian A = D_U^T D_U and its kernel vector e^{-U}.

    D_U is the forward difference version of e^{-U} d/dx e^{U} on all nodes
    (natural boundary).  The transpose is the plain one, so a complex U gives
    a complex-symmetric matrix.  On radial grids the bonds carry the weight
    r^(n-1) and the result is written in the flat variable u = r^((n-1)/2) v.
    """
    x = grid.nodes
    U = spec.U(x)
    if not np.all(np.isfinite(U)) or np.abs(np.real(U)).max() > 700:
        raise PotentialOverflow("U overflows the floating range on this grid; shrink L")
    h = grid.h
    left, right = _witten_bonds(U, h)
    if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
        raise PotentialOverflow("e^(U_i - U_b) overflows; shrink L or refine the grid")
    npts = x.size
    b = np.arange(npts - 1)
    D = sparse.csr_matrix((np.r_[left, right], (np.r_[b, b], np.r_[b, b + 1])), shape=(npts - 1, npts))
    kern = np.exp(-U)
    if grid.radial:
        rb = 0.5 * (x[1:] + x[:-1])
        wb = sparse.diags(rb ** (grid.n - 1))
        ms = sparse.diags(x ** (-(grid.n - 1) / 2.0))
        A = ms @ (D.T @ wb @ D) @ ms
        kern = kern * x ** ((grid.n - 1) / 2.0)
        kin = None
    else:
        A = D.T @ D
        kin = neumann_laplacian(npts, h)
    A = sparse.csr_matrix(A)
    herm = not np.iscomplexobj(U)
    if herm:
        A = sparse.csr_matrix(A.real)
        kern = kern.real
    op = OperatorMatrix(entries=A, grid=grid, hermitian_flag=herm, label="witten",
                        nodes=x, kinetic=kin)
    return op, kern


@dataclass(frozen=True, eq=False)
class WittenSplit:
    H: OperatorMatrix
    H0: OperatorMatrix
    W: np.ndarray
    V0: np.ndarray
    kernel: np.ndarray


def witten_splitting(spec, grid, inner=2.0, outer=4.0):
    """Write the Witten Laplacian as H0 + W with W supported in |x| < outer.

    H0 = N_h + V0 where N_h is the natural-boundary Laplacian,
    V0 = (1 - psi) Vt + psi p, p the positive tail rho^2 <x>^(2 rho - 2) and
    psi a C^2 switch equal to 1 on |x| <= inner and 0 on |x| >= outer.
    """
    if grid.radial:
        raise InvalidArgument("the threshold splitting is implemented on interval grids")
    H, kern = make_witten(spec, grid)
    x = grid.nodes
    N = neumann_laplacian(x.size, grid.h)
    Vt = (H.entries - N).diagonal()
    p = spec.tail_potential(x)
    psi = 1.0 - smoothstep((np.abs(x) - inner) / (outer - inner))
    W = psi * (Vt - p)
    V0 = (1 - psi) * Vt + psi * p
    if not H.hermitian_flag:
        V0 = V0.astype(complex)
    else:
        V0, W = V0.real, W.real
    H0 = OperatorMatrix(entries=N + sparse.diags(V0), grid=grid, hermitian_flag=H.hermitian_flag,
                        label="witten-H0", nodes=x, kinetic=N)
    return WittenSplit(H=H, H0=H0, W=W, V0=V0, kernel=kern)


@dataclass(frozen=True)
class WeightSpec:
    """kind: "power" (<x>^s), "gevrey" ((1 + x^2/R_s^2)^s) or "subexp" (e^{-a <x>^(1-mu)})."""
    kind: str
    s: float = 0.0
    a: float = 0.0
    mu: float = 0.5
    M: float = 4.0

    def __post_init__(self):
        if self.kind not in ("power", "gevrey", "subexp"):
            raise InvalidArgument(f"unknown weight kind {self.kind!r}")
        if self.kind in ("gevrey", "subexp") and not 0 < self.mu < 1:
            raise InvalidArgument("weight exponent mu must lie in (0, 1)")
        if self.kind == "gevrey" and self.M <= 1:
            raise InvalidArgument("M must exceed 1")
        if self.kind == "subexp" and self.a < 0:
            raise InvalidArgument("subexp rate must be non-negative")

    @property
    def R_s(self):
        return self.M * float(japanese(self.s)) ** (1.0 / (1.0 - self.mu))


def weight_vector(spec, where):
    """Weight values at the unknowns of a Grid (or at explicit coordinates)."""
    if isinstance(where, Grid):
        x = where.interior
    elif isinstance(where, OperatorMatrix):
        x = where.nodes
    else:
        x = np.asarray(where, dtype=float)
    x = np.abs(x)
    if spec.kind == "power":
        return japanese(x) ** spec.s
    if spec.kind == "gevrey":
        return (1.0 + (x / spec.R_s) ** 2) ** spec.s
    return np.exp(-spec.a * japanese(x) ** (1.0 - spec.mu))


def _forms(H0, u, mu, h):
    Hu = H0.entries @ u
    num = np.abs(h * np.vdot(u, Hu))
    grad = h * np.real(np.vdot(u, H0.kinetic @ u))
    pot = h * np.sum(japanese(H0.nodes) ** (-2 * mu) * np.abs(u) ** 2)
    return num, grad + pot


def coercivity_ratio(H0, u, mu):
    """|<H0 u, u>| / (|grad u|^2 + |<x>^-mu u|^2) for one vector u."""
    h = H0.grid.h if H0.grid is not None else 1.0
    num, den = _forms(H0, np.asarray(u), mu, h)
    return float(num / den)


def coercivity_constant(H0, mu, trials=200, seed=0, eig_count=10):
    """Sampled weighted-coercivity constant of H0.

    Minimum over random unit vectors and the lowest ``eig_count`` eigenvectors
    of the Hermitian part of |<H0 u, u>| / (|grad u|^2 + |<x>^-mu u|^2).
    """
    if H0.kinetic is None:
        raise InvalidArgument("operator carries no kinetic part for the gradient norm")
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    h = H0.grid.h if H0.grid is not None else 1.0
    rng = np.random.default_rng(seed)
    n = H0.size
    vecs = [rng.standard_normal(n) + 1j * rng.standard_normal(n) for _ in range(trials)]
    k = min(eig_count, n)
    tri = H0.tridiagonal()
    if tri is not None and n > 64:
        lo, d, up = tri
        e = 0.5 * (up + np.conj(lo))
        if np.iscomplexobj(e) and np.any(e.imag):
            ph = _tridiag_phases(e)
            _, S = eigh_tridiagonal(d.real, np.abs(e), select="i", select_range=(0, k - 1))
            S = ph[:, None] * S
        else:
            _, S = eigh_tridiagonal(d.real, np.real(e), select="i", select_range=(0, k - 1))
    else:
        A = H0.dense()
        _, S = np.linalg.eigh(0.5 * (A + A.conj().T))
        S = S[:, :k]
    vecs.extend(S.T)
    ratios = []
    for u in vecs:
        u = u / np.linalg.norm(u)
        num, den = _forms(H0, u, mu, h)
        ratios.append(num / den)
    return float(min(ratios))


def _tridiag_phases(e):
    """Unimodular p with conj(p_k) e_k p_{k+1} = |e_k|."""
    p = np.ones(e.size + 1, dtype=complex)
    for k, b in enumerate(e):
        ab = abs(b)
        p[k + 1] = p[k] * (np.conj(b) / ab if ab > 0 else 1.0)
    return p


def hardy_factor(n, s):
    if not 0 < s < n - 1:
        raise InvalidArgument(f"s must lie in (0, n-1) = (0, {n - 1}), got {s}")
    return 1.0 / (2.0 * np.sqrt((n - 1) * (n - 1 - s)))


def hardy_ratio(grid, v, s):
    """Discrete ratio |<x>^(-1-s/2) u|^2 / [factor (|grad u|^2 + |<x>^-s u|^2)] for radial v."""
    r = grid.nodes
    u = r ** ((grid.n - 1) / 2.0) * v
    K = laplacian(grid)
    jb = japanese(r)
    lhs = np.sum(jb ** (-2 - s) * np.abs(u) ** 2)
    rhs = np.real(np.vdot(u, K @ u)) + np.sum(jb ** (-2 * s) * np.abs(u) ** 2)
    return lhs / (hardy_factor(grid.n, s) * rhs)


def hardy_check(grid, s, trials=100, seed=0):
    """Worst ratio of the weighted Hardy inequality over random smooth radial bumps."""
    if not grid.radial:
        raise InvalidArgument("hardy_check needs a radial grid")
    hardy_factor(grid.n, s)
    rng = np.random.default_rng(seed)
    r = grid.nodes
    L = grid.L
    worst = 0.0
    for _ in range(trials):
        v = np.zeros_like(r)
        for _ in range(rng.integers(1, 4)):
            w = rng.uniform(0.2, L / 8)
            c = rng.uniform(0.0, L / 2)
            v += rng.normal() * np.exp(-((r - c) / w) ** 2) + rng.normal() * np.exp(-(r / w) ** 2)
        worst = max(worst, hardy_ratio(grid, v, s))
    return float(worst)
