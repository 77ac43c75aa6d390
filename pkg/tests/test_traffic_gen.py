import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from junction_bench.behavior import BehaviorProfile
from junction_bench.road_network import Arm, Movement, Turn
from junction_bench.traffic_gen import (KMH, ConfigurationError, GapSamplerParams, OUParams,
                                        ParameterRange, SpawnerState, TrafficFlowSpec,
                                        clipped_ou_step, draw_parameters, gap_mean, maybe_spawn,
                                        ou_step, sample_gap)
from junction_bench.vehicle_sim import SimConfig, WorldState, advance_world, track_speed

from oracles import truncnorm_mean_quad

R = ParameterRange(10.0, 40.0)
G = GapSamplerParams(16.0, 50.0, 4.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        OUParams(theta=0.0, mu=1, sigma=1)
    with pytest.raises(ValueError):
        ParameterRange(5, 5)
    with pytest.raises(ValueError):
        GapSamplerParams(50, 16)
    with pytest.raises(ValueError):
        GapSamplerParams(16, 50, n=0)
    assert G.sigma == pytest.approx(8.5)


def test_for_range_defaults():
    p = OUParams.for_range(R)
    assert p.mu == 25.0 and p.theta == 0.5 and p.tau == 1.0
    assert p.stationary_std == pytest.approx(7.5)


def test_ou_step_deterministic_limits(rng):
    p = OUParams(0.5, 20.0, 0.0)
    assert ou_step(20.0, p, rng) == pytest.approx(20.0)
    fast = OUParams(1e3, 20.0, 0.0)
    assert ou_step(-75.0, fast, rng) == pytest.approx(20.0)


def test_ou_step_reproducible():
    p = OUParams.for_range(R)
    a = [ou_step(12.0, p, np.random.default_rng(7)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_ou_transition_matches_fine_euler_maruyama():
    # independent oracle: integrate the SDE over one interval with 1000 substeps
    p = OUParams(theta=0.7, mu=3.0, sigma=1.3, tau=1.5)
    prev, n = -2.0, 40_000
    rng = np.random.default_rng(3)
    x = np.full(n, prev)
    h = p.tau / 1000
    for _ in range(1000):
        x += p.theta * (p.mu - x) * h + p.sigma * math.sqrt(h) * rng.standard_normal(n)
    exact = ou_step(np.full(n, prev), p, np.random.default_rng(4))
    se = math.sqrt(x.var() / n + exact.var() / n)
    assert abs(x.mean() - exact.mean()) < 4 * se
    assert exact.var() == pytest.approx(x.var(), rel=0.05)


def test_ou_vector_and_scalar_agree_in_law():
    p = OUParams.for_range(R)
    v = ou_step(np.full(50_000, 25.0), p, np.random.default_rng(0))
    decay = math.exp(-p.theta * p.tau)
    assert v.std() == pytest.approx(p.sigma * math.sqrt((1 - decay ** 2) / (2 * p.theta)),
                                    rel=0.02)


def test_clipped_sigma_zero_equals_unclipped(rng):
    p = OUParams(0.5, 25.0, 0.0)
    assert clipped_ou_step(25.0, p, R, rng) == 25.0
    for prev in (10.0, 17.0, 40.0):
        assert clipped_ou_step(prev, p, R, rng) == ou_step(prev, p, rng)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 1.0), st.floats(0.1, 20.0), st.floats(0.0, 1.0),
       st.integers(0, 2**31))
def test_clipped_always_in_range(theta, mu_frac, sigma, start_frac, seed):
    r = ParameterRange(10.0, 40.0)
    p = OUParams(theta, 10.0 + 30.0 * mu_frac, sigma)
    rng = np.random.default_rng(seed)
    x = np.full(2000, 10.0 + 30.0 * start_frac)
    for _ in range(5):
        x = clipped_ou_step(x, p, r, rng)
        assert np.all((x >= r.lower) & (x <= r.upper))


def test_clipped_rejection_cap():
    p = OUParams(5.0, 1000.0, 0.01)
    with pytest.raises(ConfigurationError):
        clipped_ou_step(25.0, p, R, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        clipped_ou_step(np.full(3, 25.0), p, R, np.random.default_rng(0))


def test_clipped_distribution_near_symmetric():
    p = OUParams.for_range(R)
    rng = np.random.default_rng(11)
    x = np.full(1000, p.mu)
    draws = []
    for _ in range(100):
        x = clipped_ou_step(x, p, R, rng)
        draws.append(x.copy())
    d = np.concatenate(draws)
    skew = np.mean((d - d.mean()) ** 3) / d.std() ** 3
    assert abs(skew) < 0.1


def test_gap_mean_linear_map():
    assert gap_mean(10.0, R, G) == 16.0
    assert gap_mean(40.0, R, G) == 50.0
    assert gap_mean(25.0, R, G) == pytest.approx(33.0)
    assert np.allclose(gap_mean(np.array([10.0, 40.0]), R, G), [16.0, 50.0])


def test_sample_gap_truncated(rng):
    speeds = rng.uniform(10, 40, 20_000)
    g = sample_gap(speeds, R, G, rng)
    assert np.all((g >= 16.0) & (g <= 50.0))
    assert 16.0 <= sample_gap(39.0, R, G, rng) <= 50.0


def test_sample_gap_concentrates(rng):
    tight = GapSamplerParams(16.0, 50.0, 1000.0)
    speeds = rng.uniform(10, 40, 10_000)
    g = sample_gap(speeds, R, tight, rng)
    close = np.abs(g - gap_mean(speeds, R, tight)) <= 0.1 * (50 - 16)
    assert close.mean() >= 0.99


@pytest.mark.parametrize("speed", [10.0, 18.0, 25.0, 37.0])
def test_sample_gap_mean_matches_quadrature(speed):
    rng = np.random.default_rng(int(speed))
    g = sample_gap(np.full(100_000, speed), R, G, rng)
    ref = truncnorm_mean_quad(gap_mean(speed, R, G), G.sigma, 16.0, 50.0)
    assert g.mean() == pytest.approx(ref, rel=0.01)


def test_sample_gap_rejection_cap():
    with pytest.raises(ConfigurationError):
        sample_gap(1000.0, R, GapSamplerParams(16, 50, 1000), np.random.default_rng(0))


# spawning -------------------------------------------------------------------------

def _flow(fixed=None, process=None, movement=Movement(Arm.NORTH, Turn.STRAIGHT)):
    return TrafficFlowSpec(movement, R, G, BehaviorProfile.speed_track_aeb(), process, fixed)


def test_flow_modes():
    assert _flow(fixed=(20, 30)).mode == "fixed"
    assert _flow(process=OUParams.for_range(R)).mode == "ou"
    assert _flow().mode == "uniform"


def test_spawn_into_empty_flow(imap, rng):
    flow = _flow(fixed=(36.0, 30.0))
    sp = SpawnerState.for_flow(flow)
    veh = maybe_spawn(sp, flow, WorldState(0.0, (), imap), rng)
    assert veh.s == 0.0 and veh.v == pytest.approx(10.0) and veh.v_target == pytest.approx(10.0)
    assert sp.pending_gap == 30.0 and sp.last_spawned_id == veh.id and sp.spawned == 1


def test_spawn_threshold(imap, rng):
    flow = _flow(fixed=(36.0, 30.0))
    sp = SpawnerState.for_flow(flow)
    w = WorldState(0.0, (), imap)
    first = maybe_spawn(sp, flow, w, rng)
    from dataclasses import replace
    w = w.add(replace(first, s=29.9))
    assert maybe_spawn(sp, flow, w, rng) is None
    w = WorldState(0.0, (replace(first, s=30.04),), imap)
    nxt = maybe_spawn(sp, flow, w, rng)
    assert nxt is not None and nxt.s == pytest.approx(0.04)


def test_fixed_flow_spacing_over_a_minute(imap):
    V, d = 28.0, 22.0
    flow = _flow(fixed=(V, d))
    sp = SpawnerState.for_flow(flow)
    cfg = SimConfig()
    rng = np.random.default_rng(0)
    w = WorldState(0.0, (), imap)
    spacings, targets = [], []
    for _ in range(600):
        veh = maybe_spawn(sp, flow, w, rng)
        if veh is not None:
            prev = [x for x in w.vehicles]
            if prev:
                tail = min(prev, key=lambda x: x.s)
                spacings.append(tail.s - veh.s)
            targets.append(veh.v_target)
            w = w.add(veh)
        w = advance_world(w, {x.id: track_speed(x.v, x.v_target, cfg) for x in w.vehicles}, cfg)
    assert len(targets) > 20
    assert np.allclose(targets, V * KMH, rtol=0, atol=1e-12)
    assert np.allclose(spacings, d, rtol=0, atol=1e-9)


def test_ou_flow_parameters_vary(rng):
    flow = _flow(process=OUParams.for_range(R))
    sp = SpawnerState.for_flow(flow)
    draws = [draw_parameters(sp, flow, rng) for _ in range(50)]
    speeds = [s for s, _ in draws]
    assert len(set(speeds)) == 50
    assert all(10 <= s <= 40 and 16 <= g <= 50 for s, g in draws)
    assert sp.last_ou_value == speeds[-1]


def test_uniform_flow_draws(rng):
    flow = _flow()
    sp = SpawnerState.for_flow(flow)
    draws = np.array([draw_parameters(sp, flow, rng) for _ in range(5000)])
    assert draws[:, 0].min() >= 10 and draws[:, 0].max() <= 40
    assert draws[:, 0].mean() == pytest.approx(25, abs=0.5)
    assert draws[:, 1].mean() == pytest.approx(33, abs=0.5)
