"""Potential families, bumps, switches and the Witten potential."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidArgument, UnsupportedClass, UnsupportedPotential


def japanese(x):
    """<x> = sqrt(1 + x^2); accepts complex input (principal branch)."""
    return np.sqrt(1.0 + np.asarray(x) ** 2)


def bump(s):
    """C^2 bump (1 - s^2)^3 on |s| < 1, zero outside."""
    s = np.asarray(s)
    out = np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 3, 0.0)
    return out


def smoothstep(s):
    """Quintic switch: 0 for s <= 0, 1 for s >= 1, C^2 in between."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def dsmoothstep(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    return np.where(inside, 30.0 * s * s * (1.0 - s) ** 2, 0.0)


@dataclass(frozen=True)
class WittenSpec:
    """U = u1_amplitude * <x>^rho + i * u2_amplitude * bump(|x| / u2_radius)."""
    rho: float
    u1_amplitude: float = 1.0
    u2_amplitude: float = 0.0
    u2_radius: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise InvalidArgument(f"rho must lie in (0, 1), got {self.rho}")
        if self.u2_radius <= 0:
            raise InvalidArgument("U2 radius must be positive")

    @property
    def mu(self):
        return 1.0 - self.rho

    def U(self, x):
        x = np.asarray(x, dtype=float)
        u = self.u1_amplitude * japanese(x) ** self.rho
        if self.u2_amplitude:
            u = u + 1j * self.u2_amplitude * bump(x / self.u2_radius)
        return u

    def dU(self, x):
        x = np.asarray(x, dtype=float)
        a, r = self.rho, self.u2_radius
        d = self.u1_amplitude * a * x * japanese(x) ** (a - 2)
        if self.u2_amplitude:
            s = x / r
            d = d + 1j * self.u2_amplitude * np.where(
                np.abs(s) < 1, -6.0 * x / r ** 2 * (1 - s * s) ** 2, 0.0)
        return d

    def d2U(self, x):
        x = np.asarray(x, dtype=float)
        a, r = self.rho, self.u2_radius
        jb = japanese(x)
        d2 = self.u1_amplitude * a * (jb ** (a - 2) + (a - 2) * x * x * jb ** (a - 4))
        if self.u2_amplitude:
            s = x / r
            inner = -6.0 / r ** 2 * (1 - s * s) ** 2 + 24.0 * x * x / r ** 4 * (1 - s * s)
            d2 = d2 + 1j * self.u2_amplitude * np.where(np.abs(s) < 1, inner, 0.0)
        return d2

    def potential(self, x):
        """Continuum Witten potential |U'|^2 - U'' (plain square, 1-D)."""
        return self.dU(x) ** 2 - self.d2U(x)

    def tail_potential(self, x):
        """Leading large-|x| behaviour rho^2 a^2 <x>^(2 rho - 2) of the Witten potential."""
        return (self.rho * self.u1_amplitude) ** 2 * japanese(x) ** (2 * self.rho - 2)


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of V0 = V1 - i V2 and of the compact perturbation W.

    class_tag "V": V1 = c1 <x>^(-2 mu), V2 = c2 <x>^(-2 mu').
    class_tag "A": V1 = c1 <x>^(-2 mu), V2 = c5 <x>^(-2 mu) on |x| < R.
    W = w_amplitude * bump(|x| / w_radius).  c3 and c4 are the virial and
    dissipation constants; they are only used by ``class_conditions``.
    """
    mu: float
    mu_prime: float = 0.5
    class_tag: str = "V"
    c: tuple = (1.0, 0.0, 0.0, 0.0, 0.0)
    R: float = 0.0
    w_radius: float = 1.0
    w_amplitude: float = 0.0
    witten: WittenSpec = None

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise InvalidArgument(f"mu must lie in (0, 1), got {self.mu}")
        if self.mu_prime <= 0:
            raise InvalidArgument("mu' must be positive")
        if self.class_tag not in ("V", "A"):
            raise InvalidArgument(f"unknown class tag {self.class_tag!r}")
        c = tuple(float(v) for v in self.c)
        if len(c) != 5 or min(c) < 0:
            raise InvalidArgument("need five non-negative coefficients c1..c5")
        object.__setattr__(self, "c", c)
        if self.R < 0:
            raise InvalidArgument("R must be in [0, inf]")
        if self.w_radius <= 0:
            raise InvalidArgument("W radius must be positive")

    @property
    def hermitian(self):
        return self.V2_is_zero and self.witten is None

    @property
    def V2_is_zero(self):
        if self.class_tag == "V":
            return self.c[1] == 0
        return self.c[4] == 0 or self.R == 0

    def check_dimension(self, n):
        if self.class_tag == "A":
            if n < 2:
                raise UnsupportedClass("class A potentials need dimension n >= 2")
            if n == 2 and not self.mu < 0.75:
                raise InvalidArgument("class A in two dimensions needs mu < 3/4")

    def V1(self, x):
        return self.c[0] * japanese(x) ** (-2 * self.mu)

    def V2(self, x):
        x = np.asarray(x)
        if self.class_tag == "V":
            return self.c[1] * japanese(x) ** (-2 * self.mu_prime)
        if self.c[4] == 0 or self.R == 0:
            return np.zeros(x.shape)
        if math.isinf(self.R):
            return self.c[4] * japanese(x) ** (-2 * self.mu)
        if np.iscomplexobj(x):
            raise UnsupportedPotential(
                "V2 with a finite switch radius is not analytic; use R = 0 or R = inf")
        return np.where(np.abs(x) < self.R, self.c[4] * japanese(x) ** (-2 * self.mu), 0.0)

    def W(self, x):
        if self.w_amplitude == 0:
            return np.zeros(np.shape(x))
        return self.w_amplitude * bump(np.abs(np.asarray(x, dtype=float)) / self.w_radius)

    def V0(self, x):
        """V1 - i V2 at real or complex points (analytic continuation of the formulas)."""
        return self.V1(x) - 1j * self.V2(x)


def eval_potential(spec, grid):
    """Node values (V1, V2, W) on the unknowns of ``grid``."""
    spec.check_dimension(grid.n)
    x = grid.radius() if grid.radial else grid.interior
    V1 = np.asarray(spec.V1(x), dtype=float)
    V2 = np.asarray(spec.V2(x), dtype=float)
    W = np.asarray(spec.W(x), dtype=float)
    for name, v in (("V1", V1), ("V2", V2), ("W", W)):
        if not np.all(np.isfinite(v)):
            raise InvalidArgument(f"{name} is not finite on the grid")
    return V1, V2, W


def potential_table(spec, grid):
    """Rows (x, V1, V2, W) on the unknowns of ``grid``, for CSV export."""
    V1, V2, W = eval_potential(spec, grid)
    x = grid.radius() if grid.radial else grid.interior
    return list(zip(x, V1, V2, W))


def class_conditions(spec, x):
    """Sampled versions of the class-A conditions for the built-in family.

    Returns a dict of booleans: V2 >= 0, the virial bound
    x V1'(x) <= -c3 x^2 / <x>^(2 mu + 2) on |x| >= R, and the dissipation bound
    V2 >= c5 <x>^(-2 mu) on |x| < R.
    """
    x = np.abs(np.asarray(x, dtype=float))
    mu, c = spec.mu, spec.c
    jb = japanese(x)
    virial_lhs = -2 * mu * c[0] * x * x * jb ** (-2 * mu - 2)
    virial_rhs = -c[2] * x * x * jb ** (-2 * mu - 2)
    far = x >= spec.R
    V2 = spec.V2(x)
    near = ~far
    return {
        "V2_nonnegative": bool(np.all(V2 >= 0)),
        "virial": bool(np.all(virial_lhs[far] <= virial_rhs[far] + 1e-15)),
        "dissipation": bool(np.all(V2[near] >= c[4] * jb[near] ** (-2 * mu) - 1e-15)),
    }


@dataclass(frozen=True)
class SquareBarrier:
    """Complex square barrier V = V0 on |x| < a (1-D, compact support).

    The node sitting exactly on |x| = a receives V0 / 2, the midpoint rule
    for a jump.
    """
    V0: complex
    a: float

    def values(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        edge = np.isclose(x, self.a, rtol=0, atol=1e-12 * max(1.0, self.a))
        v = np.where(x < self.a, complex(self.V0), 0.0 + 0.0j)
        return np.where(edge, complex(self.V0) / 2, v)

    @property
    def support_radius(self):
        return self.a
