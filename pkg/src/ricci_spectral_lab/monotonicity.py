"""Eigenvalue rates along the flow and the monotonicity verdicts built on them.

Predicted rates come from the metric and the normalized eigenfunction:

* surfaces: ``mu' = mu * int R f^2 dv``
* closed homogeneous models (any dimension):
  ``mu' = mu * R + 2 * int E_ij f^i f^j``

Observed rates are central differences of a tracked eigenvalue branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ClusterSkipped, HypothesisNotMet
from .geometry import full_mask, scalar_curvature, volume_weights

__all__ = [
    "RateSample",
    "Verdict",
    "Prop1Result",
    "MainTheoremResult",
    "MonotonicityReport",
    "hypothesis_feasible",
    "predicted_rate_2d",
    "predicted_rate_general",
    "observed_rate",
    "grid_rate_samples",
    "model_rate_samples",
    "cluster_mean_samples",
    "check_rate_identity",
    "check_proposition1",
    "check_main_theorem",
    "SIGN_NOTE",
]

SIGN_NOTE = (
    "note: mu' >= 0 means mu is non-decreasing in t; the theorem text's "
    "'non-increasing' contradicts its own inequality and is treated as a sign misprint"
)


def hypothesis_feasible(R_min, a_required):
    """Some ``a`` satisfies ``E >= -a g`` and ``R >= 2a`` iff ``2 a_required <= R_min``."""
    return 2.0 * a_required <= R_min


@dataclass(frozen=True)
class RateSample:
    t: float
    mu: float
    predicted_rate: float
    observed_rate: float | None
    R_min: float
    R_max: float
    a_required: float
    mode: int = 0

    @property
    def hypothesis_feasible(self):
        return hypothesis_feasible(self.R_min, self.a_required)

    @property
    def a_interval(self):
        """Admissible ``a`` values ``[a_required, R_min / 2]`` (None when empty)."""
        if not self.hypothesis_feasible:
            return None
        return (self.a_required, self.R_min / 2.0)


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str  # PASS, FAIL or SKIPPED
    err: float = math.nan
    tol: float = math.nan
    reason: str = ""

    @property
    def passed(self):
        return self.status == "PASS"

    def line(self):
        reason = f" ({self.reason})" if self.reason else ""
        return f"{self.name}: {self.status}{reason} err={self.err:.6e} tol={self.tol:.6e}"


def predicted_rate_2d(grid, pair):
    """``mu * sum R f^2 dv`` for an eigenpair solved on ``grid``."""
    R = scalar_curvature(grid)
    return float(pair.mu * np.sum(R * pair.f**2 * volume_weights(grid)))


def predicted_rate_general(R_const, einstein_term, pair_mu):
    """``mu R + 2 int E_ij f^i f^j`` for spatially constant ``R``."""
    return pair_mu * R_const + 2.0 * einstein_term


def _mu(x):
    return x.mu if hasattr(x, "mu") else float(x)


def observed_rate(traj, tracked, i):
    """Central difference ``(mu[i+1] - mu[i-1]) / (t[i+1] - t[i-1])``."""
    times = traj.times if hasattr(traj, "times") else list(traj)
    if len(times) != len(tracked):
        raise ValueError("one tracked eigenvalue per snapshot is required")
    if not 1 <= i <= len(times) - 2:
        raise IndexError(f"snapshot {i} has no neighbours on both sides (len={len(times)})")
    return (_mu(tracked[i + 1]) - _mu(tracked[i - 1])) / (times[i + 1] - times[i - 1])


def grid_rate_samples(traj, tracked, mask=None, mode=0):
    """Rate samples along a grid trajectory for one tracked branch."""
    out = []
    n = len(traj)
    for k, (t, grid) in enumerate(traj.snapshots):
        m = full_mask(grid) if mask is None else mask
        R = scalar_curvature(grid)[m.interior]
        obs = observed_rate(traj, tracked, k) if 1 <= k <= n - 2 else None
        out.append(
            RateSample(
                t=t,
                mu=tracked[k].mu,
                predicted_rate=predicted_rate_2d(grid, tracked[k]),
                observed_rate=obs,
                R_min=float(R.min()) + 0.0,
                R_max=float(R.max()),
                a_required=0.0,  # the Einstein tensor vanishes on surfaces
                mode=mode,
            )
        )
    return out


def model_rate_samples(model, mode, times):
    """Rate samples of a closed-form model; observed rates from the sampled ladder."""
    times = [float(t) for t in times]
    mus = [model.eigenvalue(mode, t) for t in times]
    out = []
    for k, t in enumerate(times):
        R = model.scalar_curvature(t)
        lam_min = model.einstein_bounds(t).lambda_min
        obs = observed_rate(times, mus, k) if 1 <= k <= len(times) - 2 else None
        out.append(
            RateSample(
                t=t,
                mu=mus[k],
                predicted_rate=predicted_rate_general(R, model.einstein_term(mode, t), mus[k]),
                observed_rate=obs,
                R_min=R,
                R_max=R,
                a_required=0.0 - lam_min,
                mode=mode,
            )
        )
    return out


def cluster_mean_samples(branches):
    """Average several branches (one sample list each) of a degenerate cluster.

    The mean of a cluster's eigenvalues is smooth in t even where the
    individual branches are not, and its rate is the mean of the member rates.
    """
    out = []
    for group in zip(*branches):
        obs = [s.observed_rate for s in group]
        out.append(
            RateSample(
                t=group[0].t,
                mu=float(np.mean([s.mu for s in group])),
                predicted_rate=float(np.mean([s.predicted_rate for s in group])),
                observed_rate=None if obs[0] is None else float(np.mean(obs)),
                R_min=group[0].R_min,
                R_max=group[0].R_max,
                a_required=group[0].a_required,
                mode=group[0].mode,
            )
        )
    return out


def check_rate_identity(samples, tol, abs_tol=1e-8, clustered=False, name="rate"):
    """Compare observed and predicted rates at every interior sample.

    A sample passes when ``|obs - pred| <= max(tol * max(|obs|, |pred|), abs_tol)``.
    The reported ``err`` is the worst ``|obs - pred| / max(|obs|, |pred|, abs_tol / tol)``.
    """
    if clustered:
        raise ClusterSkipped(f"{name}: mode lies in a degenerate cluster")
    inner = [s for s in samples if s.observed_rate is not None]
    if not inner:
        return Verdict(name, "SKIPPED", reason="need at least three snapshots")
    floor = abs_tol / tol
    errs = [
        abs(s.observed_rate - s.predicted_rate) / max(abs(s.observed_rate), abs(s.predicted_rate), floor)
        for s in inner
    ]
    worst = max(errs)
    return Verdict(name, "PASS" if worst <= tol else "FAIL", worst, tol, f"{len(inner)} samples")


@dataclass
class Prop1Result:
    part: int
    C: float
    slacks: list = field(default_factory=list)
    tol: float = 0.0

    @property
    def min_slack(self):
        return min(self.slacks)

    @property
    def passed(self):
        return self.min_slack >= -self.tol

    def verdict(self, name="prop1"):
        return Verdict(
            name,
            "PASS" if self.passed else "FAIL",
            max(0.0, -self.min_slack),
            self.tol,
            f"part {self.part}, C={self.C:.6g}, {len(self.slacks)} samples",
        )


def check_proposition1(samples, part=None, tol=1e-12):
    """Exponential bounds for surfaces with a uniform sign of R.

    Part 1 (``R >= C > 0``): ``mu(t) >= mu(t0) exp(C (t - t0))``.
    Part 2 (``R <= -C < 0``): ``mu(t) <= mu(t0) exp(-C (t - t0))``.
    ``C`` is the sharpest constant over the samples.  Slack is relative:
    ``mu / bound - 1`` for part 1 and ``1 - mu / bound`` for part 2.
    """
    if not samples:
        raise ValueError("no samples")
    c1 = min(s.R_min for s in samples)
    c2 = min(-s.R_max for s in samples)
    if part is None:
        part = 1 if c1 > 0 else 2 if c2 > 0 else None
    if part == 1 and not c1 > 0:
        raise HypothesisNotMet(f"part 1 needs R >= C > 0, but inf R = {c1:.6g}")
    if part == 2 and not c2 > 0:
        raise HypothesisNotMet(f"part 2 needs R <= -C < 0, but sup R = {-c2:.6g}")
    if part is None:
        raise HypothesisNotMet("R changes sign or vanishes; neither part applies")
    t0, mu0 = samples[0].t, samples[0].mu
    res = Prop1Result(part, c1 if part == 1 else c2, tol=tol)
    for s in samples:
        if part == 1:
            res.slacks.append(s.mu / (mu0 * math.exp(res.C * (s.t - t0))) - 1.0)
        else:
            res.slacks.append(1.0 - s.mu / (mu0 * math.exp(-res.C * (s.t - t0))))
    return res


@dataclass
class MainTheoremResult:
    intervals: list
    growth: float  # mu(t_end) / mu(t_start) - 1
    min_step_slack: float  # worst relative consecutive change
    min_rate_slack: float  # worst observed_rate / mu
    boundary_case: bool  # R == 2 a_required at every sample
    strict_expected: bool
    tol: float

    @property
    def passed(self):
        ok = self.growth >= -self.tol and self.min_step_slack >= -self.tol and self.min_rate_slack >= -self.tol
        if self.strict_expected:
            ok = ok and self.growth > 0
        return ok

    def verdict(self, name="main_theorem"):
        err = max(0.0, -min(self.growth, self.min_step_slack, self.min_rate_slack))
        a0 = self.intervals[0]
        kind = "boundary case R = 2a" if self.boundary_case else "strict increase expected"
        return Verdict(
            name,
            "PASS" if self.passed else "FAIL",
            err,
            self.tol,
            f"a in [{a0[0]:.6g}, {a0[1]:.6g}] at t0, {kind}, growth {self.growth:.6g}",
        )


def check_main_theorem(samples, tol=1e-10):
    """Non-decrease of mu on an interval where ``R >= 2a`` and ``E >= -a g`` hold.

    Requires feasibility at every sample.  Checks the endpoint growth, each
    consecutive step and each observed rate against ``-tol * mu``.  Unless
    ``R`` equals ``2 a_required`` everywhere (the equality case), growth must
    be strictly positive.
    """
    if not samples:
        raise ValueError("no samples")
    bad = [s.t for s in samples if not s.hypothesis_feasible]
    if bad:
        raise HypothesisNotMet(f"no admissible a at t={bad[0]:.6g} (R_min < 2 a_required)")
    mus = np.array([s.mu for s in samples])
    steps = np.diff(mus) / mus[:-1] if len(mus) > 1 else np.zeros(1)
    rates = [s.observed_rate / s.mu for s in samples if s.observed_rate is not None]
    boundary = all(abs(s.R_max - 2 * s.a_required) <= tol * max(1.0, abs(s.R_max)) for s in samples)
    return MainTheoremResult(
        intervals=[s.a_interval for s in samples],
        growth=float(mus[-1] / mus[0] - 1.0),
        min_step_slack=float(steps.min()),
        min_rate_slack=float(min(rates)) if rates else 0.0,
        boundary_case=boundary,
        strict_expected=not boundary,
        tol=tol,
    )


@dataclass
class MonotonicityReport:
    samples: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    bound_checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(v.status != "FAIL" for v in self.verdicts)

    def text(self):
        return "\n".join([v.line() for v in self.verdicts] + [SIGN_NOTE]) + "\n"
