"""Uniform grids on [-L, L] or on the radial half line (0, L]."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class Grid:
    L: float
    point_count: int
    h: float
    n: int
    radial: bool
    nodes: np.ndarray = field(repr=False)

    @property
    def interior(self):
        """Coordinates of the unknowns once Dirichlet rows are removed.

        Radial grids keep every node: the outer wall sits half a cell beyond
        the last node and the origin is handled by a ghost value.
        """
        if self.radial:
            return self.nodes
        return self.nodes[1:-1]

    @property
    def interior_count(self):
        return self.interior.size

    def radius(self, x=None):
        x = self.interior if x is None else x
        return np.abs(x)


def make_grid(L, point_count, n=1, radial=False):
    """Build a uniform grid.

    Interval grids have ``point_count`` nodes from -L to L inclusive.  Radial
    grids use the cell centres (i + 1/2) h with h = L / point_count.
    """
    if not np.isfinite(L) or L <= 0:
        raise InvalidArgument(f"half width must be positive, got {L}")
    if int(point_count) != point_count or point_count < 3:
        raise InvalidArgument(f"need at least 3 points, got {point_count}")
    point_count = int(point_count)
    if n < 1 or int(n) != n:
        raise InvalidArgument(f"dimension must be a positive integer, got {n}")
    if radial:
        if n < 2:
            raise InvalidArgument("radial grids need n >= 2")
        h = L / point_count
        nodes = (np.arange(point_count) + 0.5) * h
    else:
        h = 2.0 * L / (point_count - 1)
        nodes = np.linspace(-L, L, point_count)
        nodes[point_count // 2] = 0.0 if point_count % 2 else nodes[point_count // 2]
    nodes.setflags(write=False)
    return Grid(L=float(L), point_count=point_count, h=float(h), n=int(n),
                radial=bool(radial), nodes=nodes)
