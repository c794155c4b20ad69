import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci_spectral_lab.errors import ClusterSkipped, HypothesisNotMet
from ricci_spectral_lab.flow import FlowControls, evolve, model_trajectory
from ricci_spectral_lab.geometry import ConformalGrid, scalar_curvature
from ricci_spectral_lab.models import FlatTorus, HyperbolicScaled, RoundSphere, SphereCircleProduct
from ricci_spectral_lab.monotonicity import (
    RateSample,
    check_main_theorem,
    check_proposition1,
    check_rate_identity,
    cluster_mean_samples,
    grid_rate_samples,
    hypothesis_feasible,
    model_rate_samples,
    observed_rate,
    predicted_rate_2d,
    predicted_rate_general,
)
from ricci_spectral_lab.spectral import solve_grid, track_mode

from conftest import phi_rectangle


def _sphere_samples(dt, t=0.1):
    times = [t - dt, t, t + dt]
    return observed_rate(times, [2 / (1 - 2 * s) for s in times], 1)


def test_observed_rate_sphere_oracle():
    exact = 4 / (1 - 2 * 0.1) ** 2
    assert exact == pytest.approx(6.25)
    e1 = abs(_sphere_samples(1e-3) - exact)
    e2 = abs(_sphere_samples(5e-4) - exact)
    assert e1 < 1e-4
    assert 3.9 < e1 / e2 < 4.1


def test_observed_rate_constant_and_bounds():
    traj = model_trajectory(FlatTorus(), [0, 0.1, 0.2, 0.3])
    mus = [4.0] * 4
    assert observed_rate(traj, mus, 1) == 0
    with pytest.raises(IndexError):
        observed_rate(traj, mus, 0)
    with pytest.raises(IndexError):
        observed_rate(traj, mus, 3)
    with pytest.raises(ValueError):
        observed_rate(traj, mus[:3], 1)


def test_predicted_rate_examples():
    g = ConformalGrid.rectangle(16)
    (p,) = solve_grid(g)
    assert predicted_rate_2d(g, p) == 0
    # substituting constant R reproduces mu R, the sphere structure
    R = 2.0
    assert p.mu * np.sum(R * p.f**2 * p.weights) == pytest.approx(p.mu * R, rel=1e-12)
    assert predicted_rate_general(6, -3, 3) == 12
    assert predicted_rate_general(2, -1, 1) == 0
    assert predicted_rate_general(0, 0, 39.5) == 0


@pytest.mark.parametrize(
    "model", [RoundSphere(2, 1), RoundSphere(3, 1), SphereCircleProduct(1, 1), HyperbolicScaled(1, (2.0, 3.0, 4.0))]
)
def test_model_lane_rate_identity(model):
    T = min(model.maximal_time(), 1.0)
    times = np.linspace(0, 0.8 * T, 201)
    for mode in range(3):
        samples = model_rate_samples(model, mode, times)
        v = check_rate_identity(samples, tol=1e-3)
        assert v.passed, v.line()


def test_rate_identity_skips_and_clusters():
    s = [RateSample(0, 1, 0, None, 0, 0, 0)]
    assert check_rate_identity(s, 1e-2).status == "SKIPPED"
    with pytest.raises(ClusterSkipped):
        check_rate_identity(s, 1e-2, clustered=True)
    a = [RateSample(t, 1 + t, 1.0, 1.0, 0, 0, 0) for t in (0, 1)]
    b = [RateSample(t, 3 + t, 3.0, 3.0, 0, 0, 0) for t in (0, 1)]
    m = cluster_mean_samples([a, b])
    assert [x.mu for x in m] == [2, 3]
    assert m[0].predicted_rate == 2 and m[0].observed_rate == 2


def test_flat_square_rate_identity_zero():
    g = ConformalGrid.rectangle(24)
    traj = evolve(g, FlowControls(dt=1e-4, t_end=5e-4))
    tracked = [solve_grid(s)[0] for s in traj.states]
    samples = grid_rate_samples(traj, tracked)
    for s in samples:
        assert s.predicted_rate == 0
        assert s.observed_rate is None or abs(s.observed_rate) <= 1e-8
    assert check_rate_identity(samples, 0.02).passed


def test_proposition1_examples():
    ts = np.linspace(0, 0.2, 50)
    sph = check_proposition1(model_rate_samples(RoundSphere(2, 1), 0, ts))
    assert sph.part == 1 and sph.C == pytest.approx(2)
    assert sph.passed and sph.min_slack >= -1e-12

    hyp = HyperbolicScaled(1, (2.0,))
    res = check_proposition1(model_rate_samples(hyp, 0, np.linspace(0, 1, 50)))
    assert res.part == 2 and res.C == pytest.approx(2 / 3)
    assert res.passed

    flat = model_rate_samples(FlatTorus(), 0, ts)
    with pytest.raises(HypothesisNotMet):
        check_proposition1(flat)
    with pytest.raises(HypothesisNotMet):
        check_proposition1(model_rate_samples(RoundSphere(2, 1), 0, ts), part=2)


def test_proposition1_detects_violation():
    fake = [RateSample(t, 2.0, 0, None, 2.0, 2.0, 0) for t in (0, 0.1)]
    res = check_proposition1(fake)
    assert not res.passed
    assert res.verdict().status == "FAIL"


def test_main_theorem_examples():
    ts = np.linspace(0, 0.2, 50)
    s3 = model_rate_samples(RoundSphere(3, 1), 0, ts)
    assert s3[0].a_interval == pytest.approx((1, 3))
    res = check_main_theorem(s3)
    assert res.passed and res.strict_expected
    assert s3[0].mu == pytest.approx(3) and s3[-1].mu == pytest.approx(15)

    prod = SphereCircleProduct(1, 1)
    ps = model_rate_samples(prod, prod.mode_index(0, 1), ts)
    for s in ps:
        lo, hi = s.a_interval
        assert lo == pytest.approx(hi) == pytest.approx(1 / prod.sphere_radius_sq(s.t))
        assert s.predicted_rate == pytest.approx(0, abs=1e-14)
    res = check_main_theorem(ps)
    assert res.passed and res.boundary_case and res.growth == 0

    infeasible = [RateSample(0, 1, 0, None, 1.0, 1.0, 1.0)]
    with pytest.raises(HypothesisNotMet):
        check_main_theorem(infeasible)
    drop = [RateSample(t, mu, 0, None, 2.0, 2.0, 0.0) for t, mu in ((0, 2.0), (1, 1.0))]
    assert not check_main_theorem(drop).passed


@given(R=st.floats(-1e6, 1e6, allow_nan=False), a=st.floats(-1e6, 1e6, allow_nan=False))
def test_feasibility_predicate(R, a):
    s = RateSample(0, 1, 0, None, R, R, a)
    assert s.hypothesis_feasible == (2 * a <= R)
    assert hypothesis_feasible(R, a) == (2 * a <= R)
    if s.hypothesis_feasible:
        assert s.a_interval == (a, R / 2)
    else:
        assert s.a_interval is None


def test_positive_curvature_cap_increases_mu():
    g = phi_rectangle(32, "bump(0.5, 0.5, 0.3, 0.6)")
    from ricci_spectral_lab.geometry import rectangle_mask

    mask = rectangle_mask(g, 0.5)
    traj = evolve(g, FlowControls(dt=4e-5, t_end=2e-3, stride=10))
    tracked = [solve_grid(traj.states[0], mask)[0]]
    for s in traj.states[1:]:
        tracked.append(track_mode(tracked[-1], solve_grid(s, mask, count=3)))
    samples = grid_rate_samples(traj, tracked, mask)
    assert min(s.R_min for s in samples) > 0
    assert np.all(scalar_curvature(g)[mask.interior] > 0)
    res = check_main_theorem(samples, tol=1e-6)
    assert res.passed and res.strict_expected
