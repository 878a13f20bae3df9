"""Integration paths and composite Gauss-Legendre nodes."""
from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import InvalidArgument

KINDS = ("cusp", "wedge", "circle", "segment", "rectangle")


@dataclass(frozen=True)
class ContourSpec:
    """A parameterized path.

    cusp:      |Im z| = C (Re z - Re center)^mu', 0 <= Re z - Re center <= radius
    wedge:     rays center + r e^{-i delta} and center - r e^{i delta}, 0 <= r <= radius
    circle:    |z - center| = radius
    segment:   start -> end
    rectangle: axis-parallel box with opposite corners start and end

    ``node_count`` is the total over all smooth pieces; each piece is split
    into ``panels`` panels.  ``grading`` > 1 makes cusp and wedge panels
    geometric towards the apex with that ratio between neighbours.
    ``orientation`` = +1 runs anticlockwise around the enclosed region
    (the region to the right of the cusp, below the wedge).
    """
    kind: str
    node_count: int = 64
    panels: int = 1
    C: float = 1.0
    mu_prime: float = 0.5
    delta: float = 0.3
    radius: float = 1.0
    center: complex = 0.0
    start: complex = 0.0
    end: complex = 1.0
    grading: float = 1.0
    orientation: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown contour kind {self.kind!r}")
        if self.node_count < 1 or self.panels < 1:
            raise InvalidArgument("node_count and panels must be positive")
        if self.node_count % (self.pieces * self.panels):
            raise InvalidArgument(
                f"node_count {self.node_count} is not a multiple of pieces*panels = {self.pieces * self.panels}")
        if self.radius <= 0 and self.kind in ("cusp", "wedge", "circle"):
            raise InvalidArgument("radius must be positive")
        if self.kind == "cusp" and (self.C <= 0 or self.mu_prime <= 0):
            raise InvalidArgument("cusp needs C > 0 and mu' > 0")
        if self.kind == "wedge" and not 0 < self.delta < math.pi / 2:
            raise InvalidArgument("wedge angle must lie in (0, pi/2)")
        if self.grading < 1:
            raise InvalidArgument("grading ratio must be >= 1")
        if self.orientation not in (1, -1):
            raise InvalidArgument("orientation must be +1 or -1")

    @property
    def pieces(self):
        return {"cusp": 2, "wedge": 2, "circle": 1, "segment": 1, "rectangle": 4}[self.kind]

    @property
    def nodes_per_panel(self):
        return self.node_count // (self.pieces * self.panels)

    def refined(self):
        """Same path with every panel split in two."""
        return replace(self, panels=2 * self.panels, node_count=2 * self.node_count,
                       grading=math.sqrt(self.grading))

    @classmethod
    def graded_wedge(cls, delta, radius, inner=1e-9, ratio=1.25, nodes_per_panel=24, center=0.0):
        panels = max(1, int(math.ceil(math.log(radius / inner) / math.log(ratio))) + 1)
        return cls(kind="wedge", delta=delta, radius=radius, panels=panels, grading=ratio,
                   node_count=2 * panels * nodes_per_panel, center=center)

    @classmethod
    def heat_cusp(cls, C, mu_prime, t_min, panels=40, nodes_per_panel=16, grading=1.5, center=0.0):
        """Cusp truncated where |e^{-t z}| < 1e-16 for every t >= t_min."""
        return cls(kind="cusp", C=C, mu_prime=mu_prime, radius=-math.log(1e-16) / t_min,
                   panels=panels, grading=grading, node_count=2 * panels * nodes_per_panel,
                   center=center)


@dataclass(frozen=True, eq=False)
class ContourNodes:
    """Nodes z, arclength weights ds and complex weights dz (so sum f dz ~ integral f dz)."""
    z: np.ndarray
    ds: np.ndarray
    dz: np.ndarray
    piece: np.ndarray

    def __len__(self):
        return self.z.size


def _panel_edges(length, panels, grading):
    if grading == 1.0 or panels == 1:
        return np.linspace(0.0, length, panels + 1)
    inner = length * grading ** (-(panels - 1))
    return np.r_[0.0, inner * grading ** np.arange(panels)]


def _gl(edges, m):
    x, w = np.polynomial.legendre.leggauss(m)
    a, b = edges[:-1, None], edges[1:, None]
    t = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    wt = 0.5 * (b - a) * w[None, :]
    return t.ravel(), wt.ravel()


def contour_nodes(spec):
    m = spec.nodes_per_panel
    P = spec.panels
    zs, dss, dzs, pieces = [], [], [], []

    def add(z, dz, k):
        zs.append(z)
        dzs.append(dz)
        dss.append(np.abs(dz))
        pieces.append(np.full(z.size, k))

    if spec.kind == "segment":
        t, w = _gl(np.linspace(0.0, 1.0, P + 1), m)
        d = complex(spec.end) - complex(spec.start)
        add(complex(spec.start) + t * d, w * d, 0)
    elif spec.kind == "circle":
        t, w = _gl(np.linspace(0.0, 2 * np.pi, P + 1), m)
        e = np.exp(1j * t)
        add(complex(spec.center) + spec.radius * e, 1j * spec.radius * e * w, 0)
    elif spec.kind == "rectangle":
        a, b = complex(spec.start), complex(spec.end)
        x0, x1 = sorted((a.real, b.real))
        y0, y1 = sorted((a.imag, b.imag))
        corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
        t, w = _gl(np.linspace(0.0, 1.0, P + 1), m)
        for k in range(4):
            d = corners[k + 1] - corners[k]
            add(corners[k] + t * d, w * d, k)
    elif spec.kind == "cusp":
        # z = c + u^p +- i C u with p = 1/mu', u in [0, radius^mu']
        p = 1.0 / spec.mu_prime
        U = spec.radius ** spec.mu_prime
        u, w = _gl(_panel_edges(U, P, spec.grading), m)
        c = complex(spec.center)
        lower = c + u ** p - 1j * spec.C * u
        dlower = (p * u ** (p - 1) - 1j * spec.C) * w
        upper = c + u ** p + 1j * spec.C * u
        dupper = (p * u ** (p - 1) + 1j * spec.C) * w
        # anticlockwise around the region right of the cusp: lower branch outwards, upper inwards
        add(lower, dlower, 0)
        add(upper, -dupper, 1)
    elif spec.kind == "wedge":
        r, w = _gl(_panel_edges(spec.radius, P, spec.grading), m)
        er = np.exp(-1j * spec.delta)
        el = -np.exp(1j * spec.delta)
        # anticlockwise around the lower sector: right ray inwards, left ray outwards
        c = complex(spec.center)
        add(c + r * er, -er * w, 0)
        add(c + r * el, el * w, 1)
    z = np.concatenate(zs)
    dz = np.concatenate(dzs) * spec.orientation
    return ContourNodes(z=z, ds=np.concatenate(dss), dz=dz, piece=np.concatenate(pieces))


def cusp_contains(spec, lam):
    """True where eigenvalues lie strictly inside the region right of the cusp."""
    lam = np.asarray(lam, dtype=complex) - complex(spec.center)
    re = np.maximum(lam.real, 0.0)
    return (lam.real > 0) & (np.abs(lam.imag) < spec.C * re ** spec.mu_prime)


def cusp_distance(spec, lam):
    """Distance from each point to the (untruncated) cusp, by sampling plus refinement."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)) - complex(spec.center)
    out = np.empty(lam.size)
    p = 1.0 / spec.mu_prime
    for i, l in enumerate(lam):
        umax = max(abs(l) ** spec.mu_prime, abs(l) / spec.C, 1.0) * 2
        u = np.linspace(0.0, umax, 4001)
        best = np.inf
        for sgn in (1, -1):
            z = u ** p + sgn * 1j * spec.C * u
            d = np.abs(z - l)
            j = int(np.argmin(d))
            lo, hi = u[max(j - 1, 0)], u[min(j + 1, u.size - 1)]
            uu = np.linspace(lo, hi, 2001)
            best = min(best, np.abs(uu ** p + sgn * 1j * spec.C * uu - l).min())
        out[i] = best
    return out


def wedge_contains(spec, lam):
    """True where points lie strictly inside the sector below the wedge."""
    lam = np.asarray(lam, dtype=complex) - complex(spec.center)
    arg = np.angle(lam)
    return (np.abs(lam) > 0) & (arg < -spec.delta) & (arg > -np.pi + spec.delta)
