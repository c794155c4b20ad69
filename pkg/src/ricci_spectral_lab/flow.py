"""Time integration of the Ricci-Hamilton flow.

On a conformal grid the flow reduces to the scalar PDE
``d phi / dt = -R / 2 = exp(-2 phi) Lap0 phi``, advanced here by classical
RK4 under an explicit stability cap.  Closed-form models are advanced
analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp, StabilityViolation
from .geometry import PHI_GUARD, _interior_laplacian

__all__ = [
    "FlowControls",
    "Trajectory",
    "ModelState",
    "stability_bound",
    "flow_rhs",
    "step_conformal",
    "evolve",
    "advance_model",
    "model_trajectory",
]

DEFAULT_SAFETY = 0.25


@dataclass(frozen=True)
class FlowControls:
    """Stepping controls.

    ``stride`` records every k-th step (None picks 1 below 1000 steps, else
    enough to keep about 1000 snapshots).  With ``adaptive=True`` a step that
    would break the stability bound is shortened instead of rejected.
    """

    dt: float
    t_end: float
    safety: float = DEFAULT_SAFETY
    max_steps: int = 1_000_000
    stride: int | None = None
    adaptive: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")
        if self.stride is not None and (int(self.stride) != self.stride or self.stride < 1):
            raise ValueError("stride must be a positive integer")


@dataclass(frozen=True)
class ModelState:
    model: object
    time: float
    lengths: dict


@dataclass
class Trajectory:
    """Time-ordered snapshots ``(times[k], states[k])``; ``step_dts`` holds every dt taken."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    step_dts: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return self.times[k], self.states[k]

    @property
    def snapshots(self):
        return list(zip(self.times, self.states))

    def append(self, t, state):
        if self.times and not t > self.times[-1]:
            raise ValueError("snapshot times must increase strictly")
        self.times.append(float(t))
        self.states.append(state)


def stability_bound(grid, safety=DEFAULT_SAFETY):
    """Largest admissible explicit step ``safety * h_min^2 * min(exp(2 phi)) / 4``."""
    return safety * min(grid.hx, grid.hy) ** 2 * float(np.exp(2.0 * grid.phi.min())) / 4.0


def flow_rhs(grid, phi):
    """``exp(-2 phi) Lap0 phi``; rectangle edge nodes are held fixed."""
    return np.exp(-2.0 * phi) * _interior_laplacian(grid, phi)


def step_conformal(grid, dt, safety=DEFAULT_SAFETY):
    """One RK4 step of the conformal flow."""
    bound = stability_bound(grid, safety)
    if dt > bound:
        raise StabilityViolation(dt, bound, grid.time)
    phi = grid.phi
    k1 = flow_rhs(grid, phi)
    k2 = flow_rhs(grid, phi + 0.5 * dt * k1)
    k3 = flow_rhs(grid, phi + 0.5 * dt * k2)
    k4 = flow_rhs(grid, phi + dt * k3)
    new = phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    peak = float(np.max(np.abs(new))) if np.all(np.isfinite(new)) else math.inf
    if peak > PHI_GUARD:
        raise BlowUp(peak, grid.time + dt)
    return grid.with_phi(new, time=grid.time + dt)


def _default_stride(n_steps):
    return 1 if n_steps < 1000 else math.ceil(n_steps / 1000)


def evolve(initial, controls, stride=None):
    """Integrate from ``initial.time`` to ``controls.t_end``.

    The final step is shortened to land on ``t_end``.  The first and last
    states are always recorded.
    """
    t0 = initial.time
    span = controls.t_end - t0
    if span < 0:
        raise ValueError("t_end precedes the initial time")
    n_est = min(controls.max_steps, max(1, math.ceil(span / controls.dt - 1e-9)))
    stride = stride or controls.stride or _default_stride(n_est)

    traj = Trajectory()
    traj.append(t0, initial)
    grid = initial
    steps = 0
    eps = 1e-12 * max(1.0, abs(controls.t_end))
    while controls.t_end - grid.time > eps and steps < controls.max_steps:
        dt = min(controls.dt, controls.t_end - grid.time)
        if controls.adaptive:
            dt = min(dt, stability_bound(grid, controls.safety))
        grid = step_conformal(grid, dt, controls.safety)
        steps += 1
        traj.step_dts.append(dt)
        done = controls.t_end - grid.time <= eps or steps == controls.max_steps
        if steps % stride == 0 or done:
            traj.append(grid.time, grid)
    return traj


def advance_model(model, t):
    """Closed-form state of ``model`` at time ``t``."""
    return ModelState(model, float(t), model.lengths(t))


def model_trajectory(model, times):
    traj = Trajectory()
    for t in times:
        traj.append(t, advance_model(model, t))
    return traj
