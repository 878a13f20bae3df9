"""Analytic dilation, exterior distortion, sector checks and resonance scans."""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, sparse

from .errors import GapTooSmall, InvalidArgument, OracleUnavailable, UnsupportedPotential
from .linalg import ShiftedSolver, circle_moments, eigs_near
from .operators import OperatorMatrix, laplacian
from .potentials import PotentialSpec, SquareBarrier, smoothstep, dsmoothstep
from .resolvent import numerical_range_boundary, _as_operator
from .semigroup import ResidueRecord, spectral_gaps


@dataclass(frozen=True)
class DistortionSpec:
    """theta, distortion-free radius R0 and mode ("dilation" or "exterior")."""
    theta: complex
    R0: float = 0.0
    mode: str = "exterior"

    def __post_init__(self):
        if abs(self.theta) > 0.3:
            raise InvalidArgument(f"|theta| = {abs(self.theta):.3g} exceeds the 0.3 guard")
        if self.mode not in ("dilation", "exterior"):
            raise InvalidArgument(f"unknown mode {self.mode!r}")
        if self.mode == "exterior" and self.R0 <= 0:
            raise InvalidArgument("exterior distortion needs R0 > 0")

    def rho(self, r):
        return smoothstep(np.asarray(r) / self.R0 - 1.0)

    def F(self, x):
        x = np.asarray(x, dtype=float)
        return x * (1.0 + self.theta * self.rho(np.abs(x)))

    def dF(self, x):
        x = np.asarray(x, dtype=float)
        r = np.abs(x)
        return 1.0 + self.theta * (self.rho(r) + r / self.R0 * dsmoothstep(r / self.R0 - 1.0))


def _potential_at(spec, x, z):
    """Potential at the (possibly complex) points z lying over the real nodes x."""
    if isinstance(spec, SquareBarrier):
        return spec.values(x)
    if spec.witten is not None:
        raise UnsupportedPotential("Witten potentials are not continued off the real axis")
    if np.iscomplexobj(z) and np.any(np.imag(z) != 0):
        v = spec.V0(z)
    else:
        v = spec.V0(np.real(z))
    return v + spec.W(x)


def _support_radius(spec):
    if isinstance(spec, SquareBarrier):
        return spec.a
    r = spec.w_radius if spec.w_amplitude else 0.0
    if spec.class_tag == "A" and 0 < spec.R < math.inf and spec.c[4] and spec.V2_is_zero is False:
        r = max(r, spec.R)
    return r


def dilate(spec, grid, theta):
    """-(1+theta)^-2 Delta_h + diag(V0((1+theta) x)).

    Only the analytic built-in families continue; a non-zero compact W or a
    finite class-A switch radius raise unsupported-potential.
    """
    if abs(theta) > 0.3:
        raise InvalidArgument("|theta| must not exceed 0.3")
    if isinstance(spec, SquareBarrier):
        raise UnsupportedPotential("a square barrier is not dilation analytic")
    if spec.w_amplitude:
        raise UnsupportedPotential("compactly supported W is not dilation analytic")
    spec.check_dimension(grid.n)
    x = grid.radius() if grid.radial else grid.interior
    s = 1.0 + theta
    V = spec.V0(s * x if theta != 0 else x)
    K = laplacian(grid)
    herm = theta == 0 and spec.V2_is_zero
    V = np.asarray(V)
    if herm:
        V = V.real
    A = K * (s ** -2 if theta != 0 else 1.0) + sparse.diags(V)
    return OperatorMatrix(entries=A, grid=grid, hermitian_flag=bool(herm),
                          label=f"dilated theta={theta}", nodes=grid.interior, kinetic=K)


def distort(spec, grid, d):
    """Exterior complex distortion assembled from the transformed quadratic form.

    Bond coefficient 1/F'(x) at bond midpoints, mass F'(x_i) at the nodes and
    potential V(F(x_i)); the measure is removed by the symmetric scaling
    M^(-1/2) so the matrix stays complex symmetric.  For real theta it is
    similar to a Hermitian matrix.
    """
    if d.mode == "dilation":
        return dilate(spec, grid, d.theta)
    if _support_radius(spec) > d.R0:
        raise InvalidArgument("W and cutoffs must be supported inside R0")
    if isinstance(spec, PotentialSpec):
        spec.check_dimension(grid.n)
    h = grid.h
    if grid.radial:
        r = grid.nodes
        rb = r[:-1] + 0.5 * h
        rb_all = np.r_[rb, r[-1] + 0.5 * h]
        cb = 1.0 / d.dF(rb_all)
        diag = cb / h ** 2
        diag[1:] += cb[:-1] / h ** 2
        diag[0] += 2.0 / h ** 2
        off = -cb[:-1] / h ** 2
        x = r
    else:
        xa = grid.nodes
        xb = 0.5 * (xa[1:] + xa[:-1])
        cb = 1.0 / d.dF(xb)
        diag = (cb[:-1] + cb[1:]) / h ** 2
        off = -cb[1:-1] / h ** 2
        x = grid.interior
    Fx = d.F(x)
    J = d.dF(x)
    s = 1.0 / np.sqrt(J)
    Vx = _potential_at(spec, x, Fx)
    if grid.radial and grid.n != 3:
        Vx = Vx + (grid.n - 1) * (grid.n - 3) / (4.0 * Fx ** 2)
    dd = diag * s * s + Vx
    oo = off * s[:-1] * s[1:]
    herm = np.isrealobj(dd) or (not np.any(np.imag(dd)) and not np.any(np.imag(oo)))
    if herm:
        dd, oo = np.real(dd), np.real(oo)
    A = sparse.diags([oo, dd, oo], [-1, 0, 1], format="csr")
    return OperatorMatrix(entries=A, grid=grid, hermitian_flag=bool(herm),
                          label=f"distorted theta={d.theta} R0={d.R0}", nodes=x,
                          kinetic=laplacian(grid))


@dataclass(frozen=True)
class SectorResult:
    theta_im: float
    c0: float
    witness: complex
    samples: int


def sector_check(H_theta, theta_im, c_grid=None, angle_count=128, probes=64, seed=0):
    """Largest c0 with sampled range inside {Im z <= -c0 Im(theta) Re z} or {Re z <= 0}.

    Samples are the supporting-hyperplane boundary points plus random probes
    <u, H u>.  With ``c_grid`` the answer is the largest grid value not above
    the sampled optimum (0 if none qualifies).
    """
    if theta_im <= 0:
        raise InvalidArgument("sector_check needs Im theta > 0")
    H = _as_operator(H_theta)
    nr = numerical_range_boundary(H, angle_count)
    rng = np.random.default_rng(seed)
    n = H.size
    pts = list(nr.points)
    for _ in range(probes):
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        # mix in smooth low-frequency probes as well
        if _ % 2:
            k = rng.integers(1, 20)
            u = np.sin(k * np.pi * (np.arange(n) + 1) / (n + 1)) * (1 + 0.1 * u)
        u = u / np.linalg.norm(u)
        pts.append(np.vdot(u, H @ u))
    pts = np.array(pts)
    pos = pts[pts.real > 1e-14]
    if pos.size == 0:
        return SectorResult(theta_im=theta_im, c0=math.inf, witness=complex("nan"), samples=pts.size)
    ratio = -pos.imag / (theta_im * pos.real)
    j = int(np.argmin(ratio))
    c0 = float(ratio[j])
    if c_grid is not None:
        ok = [c for c in sorted(c_grid) if c <= c0]
        c0 = float(ok[-1]) if ok else 0.0
    return SectorResult(theta_im=theta_im, c0=c0, witness=complex(pos[j]), samples=int(pts.size))


def in_sector(z, c0, theta_im, real_tol=1e-3):
    z = np.asarray(z, dtype=complex)
    return (z.real > 0) & (z.imag < -real_tol) & (z.imag > -c0 * theta_im * z.real)


@dataclass(frozen=True)
class ResonanceRecord:
    nu: complex
    m_plus: int
    theta_residual: float
    real: bool = False
    residue: tuple = ()


@dataclass(frozen=True, eq=False)
class ResonanceScan:
    records: list
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]


def _in_window(z, window):
    (x0, x1), (y0, y1) = window
    return (z.real >= x0) & (z.real <= x1) & (z.imag >= y0) & (z.imag <= y1)


def distorted_spectrum(spec, grid, d, window, k=12, dense_limit=1200, seed=0):
    """Eigenvalues of the distorted operator inside a rectangle window ((re0, re1), (im0, im1))."""
    H = distort(spec, grid, d)
    (x0, x1), (y0, y1) = window
    sigma = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    w, _ = eigs_near(H, sigma, k=k, dense_limit=dense_limit, seed=seed)
    if H.size <= dense_limit:
        w = np.linalg.eigvals(H.dense())
    return w[_in_window(w, window)]


def resonance_scan(spec, grid, theta_set, window, R0=None, mode="exterior", drift_tol=1e-4,
                   real_tol=1e-3, k=12, dense_limit=1200, seed=0, multiplicity_radius=1e-5):
    """Eigenvalues of H(theta) in ``window`` that stay put as theta varies.

    Each eigenvalue found for the first theta is matched to the nearest one
    for every other theta; clusters whose spread is at most ``drift_tol``
    become ResonanceRecords.  Nothing stable gives an empty scan with
    diagnostics, not an error.
    """
    thetas = [complex(t) for t in theta_set]
    if len(set(thetas)) < 2 or any(t.imag <= 0 for t in thetas):
        raise InvalidArgument("need at least two distinct theta with Im theta > 0")
    if mode == "exterior" and R0 is None:
        raise InvalidArgument("exterior mode needs R0")
    spectra = []
    for th in thetas:
        d = DistortionSpec(theta=th, R0=R0 or 0.0, mode=mode)
        spectra.append(distorted_spectrum(spec, grid, d, window, k=k, dense_limit=dense_limit, seed=seed))
    records, drifts = [], []
    for nu in spectra[0]:
        partners = []
        for w in spectra[1:]:
            if w.size == 0:
                partners = None
                break
            partners.append(w[np.argmin(np.abs(w - nu))])
        if partners is None:
            continue
        pts = np.array([nu] + partners)
        drift = float(np.max(np.abs(pts[:, None] - pts[None, :])))
        drifts.append(drift)
        if drift <= drift_tol:
            mult = int(np.sum(np.abs(spectra[0] - nu) <= multiplicity_radius))
            records.append(ResonanceRecord(nu=complex(pts.mean()), m_plus=max(1, mult),
                                           theta_residual=drift, real=abs(pts.mean().imag) <= real_tol))
    diag = {"counts": [int(w.size) for w in spectra], "drifts": drifts,
            "thetas": thetas}
    records.sort(key=lambda r: (r.nu.real, r.nu.imag))
    return ResonanceScan(records=records, diagnostics=diag)


def resonance_residue(H_theta, nu, chi, gap=None, max_order=4, k=8, tol=1e-10):
    """Coefficients of chi e^{-itH} Pi_nu chi = e^{-it nu} sum_j t^j C_j on supp chi.

    Pi_nu and the nilpotent part come from circle moments of (z - H)^-1 on
    a circle of radius gap/2; C_j = chi (-i)^j N^j Pi_nu chi / j!.
    """
    H = _as_operator(H_theta)
    chi = np.asarray(chi, dtype=float)
    supp = np.flatnonzero(chi)
    if gap is None:
        # snap nu (often a theta average) onto the eigenvalue of this matrix
        w, _ = eigs_near(H, nu, k=k)
        nu = complex(w[np.argmin(np.abs(w - nu))])
        gap = spectral_gaps(w, [nu])[0]
    radius = 0.5 * gap
    if not np.isfinite(radius) or radius < 1e-10 * max(1.0, abs(nu)):
        raise GapTooSmall(f"gap {gap:.3g} around nu = {nu:.6g} is too small")
    n = H.size
    B = np.zeros((n, supp.size), dtype=complex)
    B[supp, np.arange(supp.size)] = chi[supp]

    def solve_at(z):
        return -ShiftedSolver(H, z).solve(B, refine=False)[supp] * chi[supp, None]

    moments, _, _ = circle_moments(solve_at, nu, radius, orders=max_order, tol=tol)
    scale = max(np.abs(moments[0]).max(), 1e-300)
    coeffs = []
    for j, M in enumerate(moments):
        if j and np.abs(M).max() <= 1e-8 * scale:
            break
        coeffs.append(((-1j) ** j / math.factorial(j)) * M)
    return ResidueRecord(nu=complex(nu), coefficients=tuple(coeffs))


def barrier_resonance_equation(V0, a, lam, parity):
    """Transfer-matrix resonance condition for the square barrier on |x| < a.

    Even: q sin(q a) + i k cos(q a) = 0; odd: q cos(q a) - i k sin(q a) = 0,
    with q = sqrt(lam - V0), k = sqrt(lam) (outgoing e^{i k |x|} outside).
    """
    q = np.sqrt(lam - V0 + 0j)
    k = np.sqrt(lam + 0j)
    if parity == "even":
        return q * np.sin(q * a) + 1j * k * np.cos(q * a)
    return q * np.cos(q * a) - 1j * k * np.sin(q * a)


def barrier_resonance_root(V0, a, guess, parity, tol=1e-14, maxiter=100):
    """Secant solve of the barrier resonance equation starting from ``guess``."""
    f = lambda z: barrier_resonance_equation(V0, a, z, parity)
    try:
        return complex(optimize.newton(f, complex(guess), tol=tol, maxiter=maxiter))
    except RuntimeError as exc:
        raise OracleUnavailable(f"secant iteration did not converge from {guess}") from exc


def sector_census(spec, grid, theta_set, drift_tol=1e-4, real_tol=1e-3, c_grid=None):
    """Count theta-stable eigenvalue clusters of the dilated operators inside the sector.

    The sector opening is the smallest c0 returned by sector_check over the
    theta set.  Returns (count, c0, per-theta eigenvalue counts in the sector).
    """
    thetas = [complex(t) for t in theta_set]
    ops = [dilate(spec, grid, th) for th in thetas]
    c0 = min(sector_check(H, th.imag, c_grid).c0 for H, th in zip(ops, thetas))
    if not np.isfinite(c0) or c0 <= 0:
        return 0, c0, [0] * len(ops)
    inside = []
    for H in ops:
        w = np.linalg.eigvals(H.dense())
        inside.append(w[in_sector(w, c0, min(t.imag for t in thetas), real_tol)])
    stable = 0
    for nu in inside[0]:
        if all(v.size and np.min(np.abs(v - nu)) <= drift_tol for v in inside[1:]):
            stable += 1
    return stable, c0, [int(v.size) for v in inside]
