"""Discrete conformal metrics g = exp(2 phi) (dx^2 + dy^2) on uniform grids.

Node ``(i, j)`` sits at ``(i * hx, j * hy)``.  On a periodic torus the grid
has ``nx * hx`` by ``ny * hy`` extent; on a Dirichlet rectangle the outer ring
of nodes is the boundary, so the extent is ``(nx - 1) * hx`` by ``(ny - 1) * hy``.

Scalar fields are plain ``(nx, ny)`` float arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

__all__ = [
    "Topology",
    "ConformalGrid",
    "DomainMask",
    "full_mask",
    "rectangle_mask",
    "flat_laplacian",
    "scalar_curvature",
    "volume_weights",
    "laplace_beltrami_apply",
    "dirichlet_energy",
    "integrate",
    "PHI_GUARD",
    "MIN_NODES",
]

PHI_GUARD = 50.0
MIN_NODES = 8


class Topology(str, enum.Enum):
    TORUS = "torus"
    RECTANGLE = "rectangle"


@dataclass(frozen=True, eq=False)
class ConformalGrid:
    """Conformal factor ``phi`` sampled on a uniform grid at flow time ``time``."""

    phi: np.ndarray
    hx: float
    hy: float
    topology: Topology = Topology.TORUS
    time: float = 0.0

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2:
            raise ValueError("phi must be a 2-D array")
        nx, ny = phi.shape
        if nx < MIN_NODES or ny < MIN_NODES:
            raise ValueError(f"grid must have at least {MIN_NODES} nodes per axis, got {nx}x{ny}")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        if not np.all(np.isfinite(phi)):
            raise ValueError("phi must be finite at every node")
        if np.max(np.abs(phi)) > PHI_GUARD:
            raise ValueError(f"max|phi| exceeds overflow guard {PHI_GUARD}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "hx", float(self.hx))
        object.__setattr__(self, "hy", float(self.hy))
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def torus(cls, n, length=1.0, phi=None, ny=None, width=None):
        """Periodic ``n x ny`` grid of a ``length x width`` torus."""
        ny = n if ny is None else ny
        width = length if width is None else width
        if phi is None:
            phi = np.zeros((n, ny))
        elif callable(phi):
            x, y = _coords(n, ny, length / n, width / ny)
            phi = phi(x, y)
        return cls(phi, length / n, width / ny, Topology.TORUS)

    @classmethod
    def rectangle(cls, n, length=1.0, phi=None, ny=None, width=None):
        """Dirichlet rectangle ``[0, length] x [0, width]`` with ``n`` cells per side.

        The grid carries ``n + 1`` nodes per axis, so ``h = length / n``.
        """
        ny = n if ny is None else ny
        width = length if width is None else width
        if phi is None:
            phi = np.zeros((n + 1, ny + 1))
        elif callable(phi):
            x, y = _coords(n + 1, ny + 1, length / n, width / ny)
            phi = phi(x, y)
        return cls(phi, length / n, width / ny, Topology.RECTANGLE)

    @property
    def nx(self):
        return self.phi.shape[0]

    @property
    def ny(self):
        return self.phi.shape[1]

    @property
    def shape(self):
        return self.phi.shape

    @property
    def periodic(self):
        return self.topology is Topology.TORUS

    @property
    def extent(self):
        if self.periodic:
            return self.nx * self.hx, self.ny * self.hy
        return (self.nx - 1) * self.hx, (self.ny - 1) * self.hy

    def coordinates(self):
        """Node coordinate arrays ``(x, y)`` with ``indexing='ij'``."""
        return _coords(self.nx, self.ny, self.hx, self.hy)

    def with_phi(self, phi, time=None):
        return replace(self, phi=phi, time=self.time if time is None else time)

    def shifted(self, c):
        """Same grid with ``phi + c`` (a constant conformal rescaling)."""
        return self.with_phi(self.phi + c)


def _coords(nx, ny, hx, hy):
    return np.meshgrid(np.arange(nx) * hx, np.arange(ny) * hy, indexing="ij")


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Boolean node mask of the open domain D; ``interior[i, j]`` marks a node of D."""

    interior: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.array(self.interior, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "interior", mask)

    @property
    def count(self):
        return int(self.interior.sum())

    def validate(self, grid):
        """Raise ``ValueError`` unless the mask is consistent with ``grid``."""
        m = self.interior
        if m.shape != grid.shape:
            raise ValueError(f"mask shape {m.shape} does not match grid {grid.shape}")
        if grid.periodic:
            if not m.all():
                raise ValueError("a torus domain must be the whole torus")
            return self
        if m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
            raise ValueError("rectangle boundary nodes must be exterior")
        if m.any():
            _, ncomp = ndimage.label(m)
            if ncomp != 1:
                raise ValueError(f"domain interior must be connected, found {ncomp} components")
        return self


def full_mask(grid):
    """Whole torus, or every non-boundary node of a rectangle."""
    m = np.ones(grid.shape, dtype=bool)
    if not grid.periodic:
        m[0] = m[-1] = False
        m[:, 0] = m[:, -1] = False
    return DomainMask(m)


def rectangle_mask(grid, fraction):
    """Centered open sub-rectangle spanning ``fraction`` of each side of a rectangle grid."""
    if grid.periodic:
        raise ValueError("sub-rectangle domains need a rectangle grid")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    lx, ly = grid.extent
    x, y = grid.coordinates()
    tol = 1e-9 * min(grid.hx, grid.hy)
    inside = (np.abs(x - lx / 2) < fraction * lx / 2 - tol) & (np.abs(y - ly / 2) < fraction * ly / 2 - tol)
    return DomainMask(inside & full_mask(grid).interior).validate(grid)


def flat_laplacian(grid, f):
    """Five-point flat Laplacian with the grid's boundary rule.

    Rectangle edges use one-sided second-order second differences.
    """
    f = np.asarray(f, dtype=float)
    return _second_diff(f, 0, grid.hx, grid.periodic) + _second_diff(f, 1, grid.hy, grid.periodic)


def _second_diff(f, axis, h, periodic):
    if periodic:
        return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / h**2
    g = np.moveaxis(f, axis, 0)
    out = np.empty_like(g)
    out[1:-1] = g[2:] - 2.0 * g[1:-1] + g[:-2]
    out[0] = 2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]
    out[-1] = 2.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]
    return np.moveaxis(out, 0, axis) / h**2


def _interior_laplacian(grid, u):
    """Five-point Laplacian on non-edge nodes (edges left at zero on rectangles)."""
    if grid.periodic:
        return flat_laplacian(grid, u)
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = (u[2:, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / grid.hx**2 + (
        u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]
    ) / grid.hy**2
    return out


def scalar_curvature(grid):
    """Scalar curvature ``R = -2 exp(-2 phi) Lap0 phi`` at every node."""
    return -2.0 * np.exp(-2.0 * grid.phi) * flat_laplacian(grid, grid.phi)


def volume_weights(grid):
    """Lumped quadrature weights ``exp(2 phi) hx hy`` for integrals against dv."""
    return np.exp(2.0 * grid.phi) * (grid.hx * grid.hy)


def laplace_beltrami_apply(grid, u, mask=None):
    """``Delta_g u = exp(-2 phi) Lap0 u`` on the nodes of D, zero elsewhere.

    ``u`` must vanish off D on rectangle grids.
    """
    u = np.asarray(u, dtype=float)
    mask = full_mask(grid) if mask is None else mask
    out = np.exp(-2.0 * grid.phi) * _interior_laplacian(grid, u)
    return np.where(mask.interior, out, 0.0)


def dirichlet_energy(grid, u, v):
    """``int g^ij u_i v_j dv`` via edge differences.

    In two dimensions the conformal factor cancels, so this is the flat
    Dirichlet form and does not depend on ``phi``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    hx, hy = grid.hx, grid.hy
    if grid.periodic:
        dux, dvx = np.roll(u, -1, 0) - u, np.roll(v, -1, 0) - v
        duy, dvy = np.roll(u, -1, 1) - u, np.roll(v, -1, 1) - v
    else:
        dux, dvx = np.diff(u, axis=0), np.diff(v, axis=0)
        duy, dvy = np.diff(u, axis=1), np.diff(v, axis=1)
    return float(np.sum(dux * dvx) * (hy / hx) + np.sum(duy * dvy) * (hx / hy))


def integrate(grid, values, mask=None):
    """Lumped ``int values dv`` over D (whole grid when ``mask`` is None)."""
    w = volume_weights(grid) * values
    if mask is not None:
        w = w[mask.interior]
    return float(np.sum(w))
