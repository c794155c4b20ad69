import math

import numpy as np
import pytest

from ricci_spectral_lab import flow

from ricci_spectral_lab.errors import BlowUp, StabilityViolation
from ricci_spectral_lab.flow import (
    FlowControls,
    Trajectory,
    advance_model,
    evolve,
    flow_rhs,
    model_trajectory,
    stability_bound,
    step_conformal,
)
from ricci_spectral_lab.geometry import ConformalGrid, scalar_curvature, volume_weights
from ricci_spectral_lab.models import RoundSphere, SphereCircleProduct

from conftest import bump_torus, phi_rectangle


def test_constant_phi_is_stationary():
    for g in (ConformalGrid.torus(16, phi=lambda x, y: 0.3 + 0 * x), ConformalGrid.rectangle(16)):
        out = step_conformal(g, 0.5 * stability_bound(g))
        assert np.array_equal(out.phi, g.phi)
        assert out.time > g.time


def test_flat_trajectory_snapshots_identical():
    g = ConformalGrid.torus(16)
    traj = evolve(g, FlowControls(dt=1e-4, t_end=0.01))
    assert len(traj) >= 2
    for _, s in traj.snapshots:
        assert np.array_equal(s.phi, g.phi)


def test_linearized_heat_decay():
    L, eps, t_end = 1.0, 1e-3, 0.004
    n = 32
    g = ConformalGrid.torus(n, L, phi=lambda x, y: eps * np.sin(2 * np.pi * x / L))
    traj = evolve(g, FlowControls(dt=0.5 * stability_bound(g), t_end=t_end))
    final = traj.states[-1]
    assert final.time == pytest.approx(t_end, abs=1e-15)
    x, _ = final.coordinates()
    amp = 2 * np.mean(final.phi * np.sin(2 * np.pi * x / L))
    h = L / n
    k2_discrete = (2 / h * math.sin(math.pi * h / L)) ** 2
    assert amp == pytest.approx(eps * math.exp(-k2_discrete * t_end), rel=5 * eps)
    k2 = (2 * math.pi / L) ** 2
    assert amp == pytest.approx(eps * math.exp(-k2 * t_end), rel=5e-3)


def test_bump_flattens():
    g = bump_torus(32)
    traj = evolve(g, FlowControls(dt=5e-5, t_end=0.01))
    assert np.abs(traj.states[-1].phi).max() < np.abs(g.phi).max()
    assert np.ptp(traj.states[-1].phi) < np.ptp(g.phi)


def test_rk4_local_error_is_fifth_order():
    g = bump_torus(24, "bump(0.4, 0.5, 0.3, 0.2)")
    dt = stability_bound(g)
    errs = []
    for d in (dt, dt / 2):
        one = step_conformal(g, d)
        two = step_conformal(step_conformal(g, d / 2), d / 2)
        errs.append(np.abs(one.phi - two.phi).max())
    assert 20 < errs[0] / errs[1] < 40


def test_step_consistent_with_curvature_rate():
    # d phi / dt = -R / 2
    g = bump_torus(32)
    dt = 1e-3 * stability_bound(g)
    out = step_conformal(g, dt)
    assert np.allclose((out.phi - g.phi) / dt, -0.5 * scalar_curvature(g), rtol=1e-5, atol=1e-5)
    assert np.allclose(flow_rhs(g, g.phi), -0.5 * scalar_curvature(g), atol=1e-9)


def test_torus_area_conserved():
    g = bump_torus(32)
    traj = evolve(g, FlowControls(dt=5e-5, t_end=0.005))
    a0 = volume_weights(g).sum()
    for s in traj.states:
        assert volume_weights(s).sum() == pytest.approx(a0, rel=1e-12)


def test_rectangle_edges_frozen():
    g = phi_rectangle(32, "bump(0.5, 0.5, 0.3, 0.3)")
    out = evolve(g, FlowControls(dt=0.9 * stability_bound(g), t_end=0.002)).states[-1]
    for edge in (np.s_[0], np.s_[-1], np.s_[:, 0], np.s_[:, -1]):
        assert np.array_equal(out.phi[edge], g.phi[edge])
    assert not np.array_equal(out.phi, g.phi)


def test_stability_violation_before_second_snapshot():
    g = bump_torus(32)
    with pytest.raises(StabilityViolation) as info:
        evolve(g, FlowControls(dt=10 * stability_bound(g), t_end=0.1))
    assert info.value.dt > info.value.bound
    traj = evolve(g, FlowControls(dt=10 * stability_bound(g), t_end=1e-3, adaptive=True))
    assert traj.times[-1] == pytest.approx(1e-3)
    assert max(traj.step_dts) <= 10 * stability_bound(g)


def test_blow_up_guard(monkeypatch):
    # stable steps obey a maximum principle, so drive the guard with a runaway right-hand side
    g = bump_torus(16)
    monkeypatch.setattr(flow, "flow_rhs", lambda grid, phi: np.full_like(phi, 1e9))
    with pytest.raises(BlowUp) as info:
        step_conformal(g, stability_bound(g))
    assert info.value.max_abs_phi > 50
    monkeypatch.setattr(flow, "flow_rhs", lambda grid, phi: np.full_like(phi, np.nan))
    with pytest.raises(BlowUp):
        step_conformal(g, stability_bound(g))


def test_evolve_is_deterministic_and_respects_stride():
    g = bump_torus(24)
    c = FlowControls(dt=1e-4, t_end=0.0035, stride=7)
    a, b = evolve(g, c), evolve(g, c)
    assert a.times == b.times
    assert all(np.array_equal(x.phi, y.phi) for x, y in zip(a.states, b.states))
    assert a.times[0] == 0 and a.times[-1] == pytest.approx(0.0035)
    assert len(a.step_dts) == 35
    assert len(a) == 6
    assert np.all(np.diff(a.times) > 0)


def test_trajectory_append_rejects_non_increasing():
    t = Trajectory()
    t.append(0.0, None)
    with pytest.raises(ValueError):
        t.append(0.0, None)


def test_advance_model_examples():
    assert advance_model(RoundSphere(2, 1), 0).lengths["r"] == 1
    assert advance_model(RoundSphere(2, 1), 0.25).lengths["r"] ** 2 == pytest.approx(0.5)
    st = advance_model(SphereCircleProduct(1, 1), 0.25)
    assert st.lengths["a"] ** 2 == pytest.approx(0.5)
    assert st.lengths["b"] == 1
    traj = model_trajectory(RoundSphere(2, 1), [0, 0.1, 0.2])
    assert [s.lengths["r"] ** 2 for s in traj.states] == pytest.approx([1, 0.8, 0.6])


def test_controls_validation():
    with pytest.raises(ValueError):
        FlowControls(dt=0, t_end=1)
    with pytest.raises(ValueError):
        FlowControls(dt=1e-3, t_end=1, safety=2)
    with pytest.raises(ValueError):
        FlowControls(dt=1e-3, t_end=1, stride=0)
    with pytest.raises(ValueError):
        evolve(ConformalGrid.torus(8, phi=np.zeros((8, 8))).with_phi(np.zeros((8, 8)), time=1.0), FlowControls(1e-3, 0.5))
