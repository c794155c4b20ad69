"""End-to-end scenario runs: flow, spectra, checks, CSV and verdict report."""

from __future__ import annotations

import logging
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field

from .catalog import phi_field
from .errors import ClusterSkipped, ConfigError, HypothesisNotMet, NumericalFailure
from .flow import FlowControls, evolve, model_trajectory
from .geometry import ConformalGrid, full_mask, rectangle_mask
from .models import FAMILIES
from .monotonicity import (
    SIGN_NOTE,
    Verdict,
    check_main_theorem,
    check_proposition1,
    check_rate_identity,
    cluster_mean_samples,
    grid_rate_samples,
    model_rate_samples,
)
from .spectral import clusters, solve_grid, track_mode
from .varcheck import IDENTITY_CHECKS, check_laplacian_variation, fit_order, identity_suite

__all__ = [
    "CSV_HEADER",
    "RunResult",
    "build_model",
    "build_grid",
    "model_fd_rate",
    "run_scenario",
    "run_refinement_study",
    "output_dir",
]

log = logging.getLogger(__name__)

CSV_HEADER = "t,mode,mu,predicted_rate,observed_rate,R_min,R_max,a_required,hypothesis_feasible"
EXACT_ZERO = 1e-12
MODEL_FD_STEP = 1e-5


@dataclass
class RunResult:
    exit_code: int
    csv_paths: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    report_path: str | None = None
    message: str = ""

    def summary(self):
        lines = [v.line() for v in self.verdicts]
        if self.message:
            lines.append(self.message)
        return "\n".join(lines)


def output_dir(config):
    return os.environ.get("RSL_OUTPUT_DIR") or config["output.dir"]


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _csv_text(samples):
    lines = [CSV_HEADER]
    for s in samples:
        row = (s.t, s.mode, s.mu, s.predicted_rate, s.observed_rate, s.R_min, s.R_max, s.a_required)
        lines.append(",".join(_fmt(v) for v in row) + "," + _fmt(s.hypothesis_feasible))
    return "\r\n".join(lines) + "\r\n"


def build_model(config):
    family = config["model.family"]
    if family == "RoundSphere":
        return FAMILIES[family](config["model.dim"], config["model.r0"])
    if family == "HyperbolicScaled":
        return FAMILIES[family](config["model.c0"], config.get("model.spectrum"))
    if family == "FlatTorus":
        return FAMILIES[family](config["model.lx"], config["model.ly"])
    return FAMILIES[family](config["model.a0"], config["model.b0"])


def build_grid(config, refine=0):
    n = config["grid.n"] * 2**refine
    length = config["grid.length"]
    expr = config["grid.phi"]
    if config["grid.topology"] == "torus":
        grid = ConformalGrid.torus(n, length, phi=lambda x, y: phi_field(expr, x, y, (length, length), True))
        return grid, full_mask(grid)
    grid = ConformalGrid.rectangle(n, length, phi=lambda x, y: phi_field(expr, x, y, (length, length), False))
    frac = config["domain.fraction"]
    return grid, full_mask(grid) if frac >= 1 else rectangle_mask(grid, frac)


def model_fd_rate(model, mode, t, step=MODEL_FD_STEP):
    """Fourth-order finite-difference derivative of ``model.eigenvalue`` in t.

    Central five-point stencil where it fits in ``[0, T)``, else the
    one-sided fourth-order stencil.
    """
    f = lambda s: model.eigenvalue(mode, s)  # noqa: E731
    T = model.maximal_time()
    if t - 2 * step >= 0 and t + 2 * step < T:
        return (f(t - 2 * step) - 8 * f(t - step) + 8 * f(t + step) - f(t + 2 * step)) / (12 * step)
    sgn = 1.0 if t + 4 * step < T else -1.0
    h = sgn * step
    return (-25 * f(t) + 48 * f(t + h) - 36 * f(t + 2 * h) + 16 * f(t + 3 * h) - 3 * f(t + 4 * h)) / (12 * h)


def _worst(name, verdicts, tol):
    """Fold per-mode verdicts: FAIL beats PASS beats SKIPPED."""
    if not verdicts:
        return Verdict(name, "SKIPPED", tol=tol, reason="nothing to check")
    run = [v for v in verdicts if v.status != "SKIPPED"]
    if not run:
        return Verdict(name, "SKIPPED", tol=tol, reason=verdicts[0].reason)
    worst = max(run, key=lambda v: (v.status == "FAIL", v.err))
    status = "FAIL" if any(v.status == "FAIL" for v in run) else "PASS"
    reason = worst.reason if len(verdicts) == 1 else f"{len(run)} of {len(verdicts)} modes, worst: {worst.reason}"
    return Verdict(name, status, worst.err, worst.tol, reason)


def _identity_verdict(name, checks, tol):
    if not checks:
        return Verdict(name, "SKIPPED", tol=tol, reason="need at least three snapshots")
    abs_err = max(c.max_abs_err for c in checks)
    if abs_err <= EXACT_ZERO:
        return Verdict(name, "PASS", abs_err, EXACT_ZERO, f"{len(checks)} snapshots, exact (absolute)")
    rel = max(c.rel_err for c in checks)
    return Verdict(name, "PASS" if rel <= tol else "FAIL", rel, tol, f"{len(checks)} snapshots, relative")


def _model_times(config, model):
    t0, t1, dt = config["flow.t_start"], config["flow.t_end"], config["flow.dt"]
    T = model.maximal_time()
    if t1 >= T:
        raise ConfigError(f"flow.t_end={t1} reaches the maximal time {T} of {model.family}")
    n = max(1, round((t1 - t0) / dt))
    if n > config["flow.max_steps"]:
        raise ConfigError("flow.max_steps too small for the requested sampling")
    return [t0 + (t1 - t0) * k / n for k in range(n + 1)]


def _model_lane(config, checks):
    model = build_model(config)
    times = _model_times(config, model)
    modes = config.get("model.modes") or tuple(range(config["spectral.count"]))
    per_mode = {k: model_rate_samples(model, k, times) for k in modes}
    verdicts = []
    for name in checks:
        if name == "rate_general":
            tol = config["tol.rate_general"]
            errs = [
                abs(model.rate_prediction(k, t) - model_fd_rate(model, k, t)) for k in modes for t in times
            ]
            err = max(errs)
            verdicts.append(
                Verdict(name, "PASS" if err <= tol else "FAIL", err, tol, f"{len(errs)} (mode, t) points")
            )
        elif name == "prop1":
            tol = config["tol.prop1"]
            if model.dim != 2:
                verdicts.append(Verdict(name, "SKIPPED", tol=tol, reason=f"needs a surface, got dim {model.dim}"))
                continue
            verdicts.append(_worst(name, [_prop1(per_mode[k], tol) for k in modes], tol))
        elif name == "main_theorem":
            tol = config["tol.main_theorem"]
            verdicts.append(_worst(name, [_main(per_mode[k], tol) for k in modes], tol))
        elif name in ("eq5", "inverse_metric", "eq7", "bianchi"):
            tol = config["tol.identity"]
            found = []
            for t in times:
                lo = max(0.0, t - MODEL_FD_STEP)
                if lo + 2 * MODEL_FD_STEP >= model.maximal_time():
                    lo = t - 2 * MODEL_FD_STEP
                mini = model_trajectory(model, [lo, lo + MODEL_FD_STEP, lo + 2 * MODEL_FD_STEP])
                if name == "eq7":
                    found += [check_laplacian_variation(mini, 1, mode=k) for k in modes]
                else:
                    found.append(identity_suite(mini, 1, names=(name,))[name])
            verdicts.append(_identity_verdict(name, found, tol))
        else:
            verdicts.append(Verdict(name, "SKIPPED", reason="needs the grid lane"))
    samples = [per_mode[k][j] for j in range(len(times)) for k in modes]
    return samples, verdicts


def _prop1(samples, tol):
    try:
        return check_proposition1(samples, tol=tol).verdict()
    except HypothesisNotMet as exc:
        return Verdict("prop1", "SKIPPED", tol=tol, reason=f"hypothesis not met: {exc}")


def _main(samples, tol):
    try:
        return check_main_theorem(samples, tol=tol).verdict()
    except HypothesisNotMet as exc:
        return Verdict("main_theorem", "SKIPPED", tol=tol, reason=f"hypothesis not met: {exc}")


def _controls(config, refine=0, stride=None):
    return FlowControls(
        dt=config["flow.dt"] / 4**refine,
        t_end=config["flow.t_end"],
        safety=config["flow.safety"],
        max_steps=config["flow.max_steps"] * 4**refine,
        stride=stride if stride is not None else config.get("flow.stride"),
        adaptive=config["flow.adaptive"],
    )


def _track_branches(states, mask, count, tol, indices=None):
    """Per-mode eigen branches plus the cluster structure at the first state.

    Simple modes are followed with ``track_mode``; members of degenerate
    clusters keep their sorted index.  Returns ``(branches, groups, n_solve)``.
    """
    n_solve = min(count + 2, 20)
    solved = [solve_grid(s, mask, n_solve, tol) for s in states]
    groups = clusters(solved[0])
    group_of = {i: g for g in groups for i in g}
    branches = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        for k in range(n_solve):
            if len(group_of[k]) > 1:
                branches[k] = [pairs[k] for pairs in solved]
                continue
            branch = [solved[0][k]]
            for pairs in solved[1:]:
                branch.append(track_mode(branch[-1], pairs))
            branches[k] = branch
    for w in caught:
        log.warning("%s", w.message)
    return branches, groups, n_solve


def _rate_samples_for(traj, mask, branches, groups, n_solve, k):
    """Samples to use in rate checks for mode ``k`` (cluster means when degenerate)."""
    group = next(g for g in groups if k in g)
    if len(group) == 1:
        return grid_rate_samples(traj, branches[k], mask, mode=k), False
    if group[-1] >= n_solve - 1:
        return None, True
    members = [grid_rate_samples(traj, branches[i], mask, mode=k) for i in group]
    return cluster_mean_samples(members), False


def _grid_lane(config, checks):
    grid, mask = build_grid(config)
    traj = evolve(grid, _controls(config))
    count = config["spectral.count"]
    branches, groups, n_solve = _track_branches(traj.states, mask, count, config["spectral.tol"])
    per_mode = {k: grid_rate_samples(traj, branches[k], mask, mode=k) for k in range(count)}
    inner = range(1, len(traj) - 1)
    verdicts = []
    for name in checks:
        if name == "rate2d":
            tol = config["tol.rate2d"]
            found = []
            for k in range(count):
                samples, truncated = _rate_samples_for(traj, mask, branches, groups, n_solve, k)
                if truncated:
                    found.append(Verdict(name, "SKIPPED", tol=tol, reason=f"mode {k}: cluster extends past solved modes"))
                    continue
                try:
                    found.append(check_rate_identity(samples, tol, config["tol.rate_abs"], name=name))
                except ClusterSkipped as exc:
                    found.append(Verdict(name, "SKIPPED", tol=tol, reason=str(exc)))
            verdicts.append(_worst(name, found, tol))
        elif name == "prop1":
            tol = config["tol.prop1"]
            verdicts.append(_worst(name, [_prop1(per_mode[k], tol) for k in range(count)], tol))
        elif name == "main_theorem":
            tol = config["tol.main_theorem"]
            verdicts.append(_worst(name, [_main(per_mode[k], tol) for k in range(count)], tol))
        elif name in IDENTITY_CHECKS:
            idx = range(len(traj)) if name == "bianchi" else inner
            found = [identity_suite(traj, i, mask, names=(name,))[name] for i in idx]
            verdicts.append(_identity_verdict(name, found, config["tol.identity"]))
        else:
            verdicts.append(Verdict(name, "SKIPPED", reason="closed model geometries only"))
    samples = [per_mode[k][j] for j in range(len(traj)) for k in range(count)]
    return samples, verdicts


def _finish(config, suffix, csv_text, verdicts, extra_lines=()):
    out = output_dir(config)
    base = os.path.join(out, config["name"])
    csv_path = base + suffix + ".csv"
    report_path = base + suffix + "_report.txt"
    _atomic_write(csv_path, csv_text)
    lines = [v.line() for v in verdicts] + list(extra_lines) + [SIGN_NOTE]
    _atomic_write(report_path, "\n".join(lines) + "\n")
    code = 1 if any(v.status == "FAIL" for v in verdicts) else 0
    return RunResult(code, [csv_path], verdicts, report_path)


def _guarded(fn, config):
    try:
        return fn()
    except (ConfigError, ValueError, TypeError) as exc:
        return RunResult(2, message=f"configuration error: {exc}")
    except NumericalFailure as exc:
        msg = f"numerical failure: {exc}"
        try:
            base = os.path.join(output_dir(config), config["name"])
            _atomic_write(base + "_report.txt", msg + "\n")
        except OSError:
            pass
        return RunResult(3, message=msg)


def run_scenario(config):
    """Run one scenario end to end and write ``<name>.csv`` and ``<name>_report.txt``."""

    def go():
        checks = config["checks"]
        lane = _model_lane if config["lane"] == "model" else _grid_lane
        samples, verdicts = lane(config, checks)
        return _finish(config, "", _csv_text(samples), verdicts)

    return _guarded(go, config)


def _default_stride(config):
    n_steps = math.ceil(config["flow.t_end"] / config["flow.dt"] - 1e-9)
    return max(1, math.ceil(n_steps / 8))


def _refine_errors(config, level, stride0, checks):
    """Errors of each convergence check at the common comparison time of ``level``."""
    grid, mask = build_grid(config, refine=level)
    traj = evolve(grid, _controls(config, level, stride0 * 2**level))
    base_len = (len(traj) - 1) // 2**level + 1
    if base_len < 3:
        raise ConfigError("refinement needs at least three snapshots on the coarsest level")
    i = ((base_len - 1) // 2) * 2**level
    errs = {}
    for name in checks:
        if name in IDENTITY_CHECKS:
            c = identity_suite(traj, i, mask, names=(name,))[name]
            errs[name] = c.max_abs_err if c.max_abs_err <= EXACT_ZERO else c.rel_err
        elif name == "rate2d":
            window = traj.states[i - 1 : i + 2]
            count = config["spectral.count"]
            branches, groups, n_solve = _track_branches(window, mask, count, config["spectral.tol"])
            sub = type(traj)(traj.times[i - 1 : i + 2], list(window))
            worst = 0.0
            for k in range(count):
                samples, truncated = _rate_samples_for(sub, mask, branches, groups, n_solve, k)
                if truncated:
                    continue
                s = samples[1]
                diff = abs(s.observed_rate - s.predicted_rate)
                scale = max(abs(s.observed_rate), abs(s.predicted_rate))
                worst = max(worst, diff if diff <= EXACT_ZERO or scale == 0 else diff / scale)
            errs[name] = worst
    return traj.times[i], grid.shape, errs


def run_refinement_study(config, levels=None):
    """Rerun a grid scenario on ``levels`` grids (h halved, dt quartered, stride doubled).

    Snapshot spacing halves with h, so time-difference and stencil errors
    both fall like h^2.  A check passes when its fitted order reaches
    ``tol.order`` or its errors are exactly zero on every level.
    """

    def go():
        nlev = config["refine.levels"] if levels is None else levels
        if config["lane"] != "grid":
            raise ConfigError("refinement studies need the grid lane")
        if not 2 <= nlev <= 4:
            raise ConfigError("refinement needs between 2 and 4 levels")
        stride0 = config.get("flow.stride") or _default_stride(config)
        conv = [c for c in config["checks"] if c in IDENTITY_CHECKS or c == "rate2d"]
        table = {c: [] for c in conv}
        rows = ["check,level,nx,ny,dt,t,error"]
        for lev in range(nlev):
            t, shape, errs = _refine_errors(config, lev, stride0, conv)
            for c in conv:
                table[c].append(errs[c])
                rows.append(
                    ",".join([c, str(lev), str(shape[0]), str(shape[1]), _fmt(config["flow.dt"] / 4**lev), _fmt(t), _fmt(errs[c])])
                )
        threshold = config["tol.order"]
        verdicts = []
        for c in config["checks"]:
            if c not in table:
                verdicts.append(Verdict(c, "SKIPPED", reason="not a convergence check"))
                continue
            errs = table[c]
            if max(errs) <= EXACT_ZERO:
                verdicts.append(Verdict(c, "PASS", max(errs), threshold, "degenerate (exact)"))
                continue
            order = fit_order(errs)
            ok = order >= threshold
            verdicts.append(Verdict(c, "PASS" if ok else "FAIL", errs[-1], threshold, f"order={order:.3f}"))
        return _finish(config, "_refine", "\r\n".join(rows) + "\r\n", verdicts)

    return _guarded(go, config)
