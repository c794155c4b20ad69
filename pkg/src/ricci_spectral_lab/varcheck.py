"""Numerical checks of the metric-variation identities along a flow.

Each check compares two independently computed sides of an identity at
snapshot ``i`` of a trajectory.  Time derivatives are central differences
over snapshots ``i - 1`` and ``i + 1``; on grids the remaining spatial
quantities share one discretization, so residuals measure time-difference
error except where noted (``bianchi`` and ``eq6`` compare two spatial
stencils).  Trajectories of closed-form models are supported too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import ConformalGrid, full_mask, laplace_beltrami_apply, scalar_curvature, volume_weights
from .models import ModelGeometry

__all__ = [
    "IdentityCheck",
    "check_volume_evolution",
    "check_inverse_metric_evolution",
    "check_laplacian_variation",
    "check_bianchi",
    "check_eq6_chain",
    "identity_suite",
    "default_test_fields",
    "estimate_order",
    "fit_order",
    "IDENTITY_CHECKS",
]


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: object
    rhs: object
    max_abs_err: float
    rel_err: float
    order_estimate: float | None = None

    def line(self):
        order = "" if self.order_estimate is None else f" order={self.order_estimate:.3f}"
        return f"{self.name}: max_abs_err={self.max_abs_err:.3e} rel_err={self.rel_err:.3e}{order}"


def _make(name, lhs, rhs, scale=None):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    err = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    scale = float(np.max(np.abs(rhs))) if scale is None else float(scale)
    rel = err / scale if scale > 0 else err
    return IdentityCheck(name, lhs, rhs, err, rel)


def _neighbours(traj, i):
    if not 1 <= i <= len(traj) - 2:
        raise IndexError(f"snapshot {i} has no neighbours on both sides (len={len(traj)})")
    (tm, sm), (t0, s0), (tp, sp) = traj[i - 1], traj[i], traj[i + 1]
    return sm, s0, sp, tp - tm, t0


def _is_model(state):
    return hasattr(state, "model") and isinstance(state.model, ModelGeometry)


def _mask(grid, mask):
    return (full_mask(grid) if mask is None else mask).interior


def check_volume_evolution(traj, i, mask=None):
    """``d(dv)/dt = -R dv`` at snapshot ``i``."""
    sm, s0, sp, dt, t = _neighbours(traj, i)
    if _is_model(s0):
        model = s0.model
        lhs = (model.volume_factor(sp.time) - model.volume_factor(sm.time)) / dt
        rhs = -model.scalar_curvature(t) * model.volume_factor(t)
        return _make("eq5", [lhs], [rhs])
    m = _mask(s0, mask)
    lhs = (volume_weights(sp) - volume_weights(sm)) / dt
    rhs = -scalar_curvature(s0) * volume_weights(s0)
    return _make("eq5", lhs[m], rhs[m])


def check_inverse_metric_evolution(traj, i, mask=None):
    """``d(g^ij)/dt = 2 R^ij``; on conformal grids both sides are multiples of ``delta^ij``."""
    sm, s0, sp, dt, t = _neighbours(traj, i)
    if _is_model(s0):
        model = s0.model
        lhs = [(1 / bp.scale - 1 / bm.scale) / dt for bp, bm in zip(model.blocks(sp.time), model.blocks(sm.time))]
        rhs = [2 * b.ricci / b.scale for b in model.blocks(t)]
        return _make("inverse_metric", lhs, rhs)
    m = _mask(s0, mask)
    lhs = (np.exp(-2 * sp.phi) - np.exp(-2 * sm.phi)) / dt
    rhs = scalar_curvature(s0) * np.exp(-2 * s0.phi)
    return _make("inverse_metric", lhs[m], rhs[m])


def default_test_fields(grid, mask=None):
    """Smooth test fields ``(u, v)`` compatible with the grid topology.

    Tori get low trigonometric modes; rectangles get cubic polynomial bumps
    on the bounding box of D, so ``u`` and ``v`` vanish with their first two
    derivatives on its boundary.
    """
    x, y = grid.coordinates()
    lx, ly = grid.extent
    if grid.periodic:
        u = np.cos(2 * math.pi * x / lx) + 0.5 * np.sin(2 * math.pi * y / ly)
        v = np.cos(2 * math.pi * x / lx) + 0.3 * np.cos(2 * math.pi * y / ly)
        return u, v
    m = _mask(grid, mask)
    ii, jj = np.nonzero(m)
    x0, x1 = (ii.min() - 1) * grid.hx, (ii.max() + 1) * grid.hx
    y0, y1 = (jj.min() - 1) * grid.hy, (jj.max() + 1) * grid.hy
    bx = np.clip((x - x0) * (x1 - x) / ((x1 - x0) / 2) ** 2, 0, None) ** 3
    by = np.clip((y - y0) * (y1 - y) / ((y1 - y0) / 2) ** 2, 0, None) ** 3
    u = np.where(m, bx * by, 0.0)
    v = np.where(m, bx * by * (1 + 0.5 * (x - x0) / (x1 - x0)), 0.0)
    return u, v


def check_laplacian_variation(traj, i, u=None, mask=None, mode=0):
    """``Delta' u = R Delta u`` on grids (surfaces).

    For model trajectories ``u`` is the eigenfunction of ``mode`` and the
    check compares ``-dlambda/dt`` with ``-kappa`` where
    ``2 R^ij f_ij = -kappa f``.
    """
    sm, s0, sp, dt, t = _neighbours(traj, i)
    if _is_model(s0):
        model = s0.model
        lhs = -(model.eigenvalue(mode, sp.time) - model.eigenvalue(mode, sm.time)) / dt
        rhs = -model.laplacian_variation_rate(mode, t)
        return _make("eq7", [lhs], [rhs])
    if u is None:
        u = default_test_fields(s0, mask)[0]
    lhs = (laplace_beltrami_apply(sp, u, mask) - laplace_beltrami_apply(sm, u, mask)) / dt
    rhs = scalar_curvature(s0) * laplace_beltrami_apply(s0, u, mask)
    m = _mask(s0, mask)
    return _make("eq7", lhs[m], rhs[m])


def _central(f, axis, h, periodic):
    if periodic:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)
    return np.gradient(f, h, axis=axis, edge_order=2)


def check_bianchi(source, t=None, mask=None):
    """``2 R_ij;j = R_i`` via two discrete paths.

    On a conformal grid path (a) takes the covariant divergence of
    ``Ric = (R/2) g`` with Christoffel symbols from central differences of
    ``phi``; path (b) differentiates ``R`` directly.  Homogeneous models
    give ``0 = 0``.
    """
    if isinstance(source, ModelGeometry):
        source.check_time(0.0 if t is None else t)
        return _make("bianchi", np.zeros(2), np.zeros(2))
    if _is_model(source):
        source.model.check_time(source.time)
        return _make("bianchi", np.zeros(2), np.zeros(2))
    grid = source
    if not isinstance(grid, ConformalGrid):
        raise TypeError("bianchi check needs a ConformalGrid or a model geometry")
    R = scalar_curvature(grid)
    T = 0.5 * R * np.exp(2 * grid.phi)  # Ric_ij = T delta_ij
    e = np.exp(-2 * grid.phi)
    path_a, path_b = [], []
    for axis, h in ((0, grid.hx), (1, grid.hy)):
        dphi = _central(grid.phi, axis, h, grid.periodic)
        path_a.append(2 * e * (_central(T, axis, h, grid.periodic) - 2 * T * dphi))
        path_b.append(_central(R, axis, h, grid.periodic))
    m = _mask(grid, mask)
    return _make("bianchi", np.stack(path_a)[:, m], np.stack(path_b)[:, m])


def _trapezoid_weights(grid):
    w = np.full(grid.shape, grid.hx * grid.hy)
    if not grid.periodic:
        w[0] *= 0.5
        w[-1] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
    return w


def check_eq6_chain(traj, i, u=None, v=None, mask=None):
    """Integrated variation chain
    ``2 int R^ij u_i v_j - int R u^i v_i = -int Delta' u v + int Delta u v R``.

    The two left-hand integrals use different spatial quadratures
    (edge midpoints versus nodal central differences); ``Delta' u`` is a
    central time difference.  ``v`` must vanish off D.
    """
    sm, s0, sp, dt, t = _neighbours(traj, i)
    if _is_model(s0):
        raise TypeError("eq6 needs a grid trajectory")
    du, dv_ = default_test_fields(s0, mask)
    u = du if u is None else np.asarray(u, dtype=float)
    v = dv_ if v is None else np.asarray(v, dtype=float)
    grid = s0
    R = scalar_curvature(grid)
    hx, hy = grid.hx, grid.hy

    # 2 R^ij u_i v_j dv = R grad0 u . grad0 v dx dy, sampled on edge midpoints
    if grid.periodic:
        ex = [np.roll(a, -1, 0) - a for a in (u, v)]
        ey = [np.roll(a, -1, 1) - a for a in (u, v)]
        rx = 0.5 * (R + np.roll(R, -1, 0))
        ry = 0.5 * (R + np.roll(R, -1, 1))
    else:
        ex = [np.diff(a, axis=0) for a in (u, v)]
        ey = [np.diff(a, axis=1) for a in (u, v)]
        rx = 0.5 * (R[1:] + R[:-1])
        ry = 0.5 * (R[:, 1:] + R[:, :-1])
        # edges lying on the outer rows/columns carry half weight
        ex[0] = ex[0] * _half_rows(ex[0].shape, 1)
        ey[0] = ey[0] * _half_rows(ey[0].shape, 0)
    term1 = float(np.sum(rx * ex[0] * ex[1]) * hy / hx + np.sum(ry * ey[0] * ey[1]) * hx / hy)

    # R u^i v_i dv with nodal central differences
    gu = [_central(u, a, h, grid.periodic) for a, h in ((0, hx), (1, hy))]
    gv = [_central(v, a, h, grid.periodic) for a, h in ((0, hx), (1, hy))]
    term2 = float(np.sum(R * (gu[0] * gv[0] + gu[1] * gv[1]) * _trapezoid_weights(grid)))

    w = volume_weights(grid)
    lap_dot = (laplace_beltrami_apply(sp, u, mask) - laplace_beltrami_apply(sm, u, mask)) / dt
    term3 = -float(np.sum(lap_dot * v * w))
    term4 = float(np.sum(laplace_beltrami_apply(grid, u, mask) * v * R * w))
    scale = max(abs(term1), abs(term2), abs(term3), abs(term4))
    check = _make("eq6", [term1 - term2], [term3 + term4], scale=scale)
    return replace(check, lhs=np.array([term1, term2]), rhs=np.array([term3, term4]))


def _half_rows(shape, axis):
    s = np.ones(shape)
    idx = [slice(None), slice(None)]
    for end in (0, -1):
        idx[axis] = end
        s[tuple(idx)] = 0.5
    return s


IDENTITY_CHECKS = ("eq5", "inverse_metric", "eq7", "eq6", "bianchi")


def identity_suite(traj, i, mask=None, u=None, v=None, names=IDENTITY_CHECKS):
    """Run the requested identity checks at snapshot ``i``; returns ``{name: IdentityCheck}``."""
    s0 = traj.states[i]
    out = {}
    for name in names:
        if name == "eq5":
            out[name] = check_volume_evolution(traj, i, mask)
        elif name == "inverse_metric":
            out[name] = check_inverse_metric_evolution(traj, i, mask)
        elif name == "eq7":
            out[name] = check_laplacian_variation(traj, i, u, mask)
        elif name == "eq6":
            out[name] = check_eq6_chain(traj, i, u, v, mask)
        elif name == "bianchi":
            out[name] = check_bianchi(s0, mask=mask)
        else:
            raise ValueError(f"unknown identity check {name!r}")
    return out


def estimate_order(coarse, fine, factor=2.0):
    """Attach the observed convergence order between two refinement levels to ``fine``."""
    if fine.rel_err <= 0 or coarse.rel_err <= 0:
        order = math.inf if fine.rel_err < coarse.rel_err else math.nan
    else:
        order = math.log(coarse.rel_err / fine.rel_err) / math.log(factor)
    return replace(fine, order_estimate=order)


def fit_order(errors, factor=2.0):
    """Least-squares slope of ``-log(err)`` per refinement level, in powers of ``factor``."""
    errors = np.asarray(errors, dtype=float)
    if errors.size < 2:
        raise ValueError("an order needs at least two refinement levels")
    if np.any(errors <= 0):
        return math.nan
    levels = np.arange(errors.size)
    slope = np.polyfit(levels, np.log(errors), 1)[0]
    return float(-slope / math.log(factor))
