"""The two rule-based ego drivers: IDM car following and speed tracking with AEB.

    python demos/02_rule_based_drivers.py
"""
# %%
from junction_bench.agents import AEBAgent, IDMAgent
from junction_bench.behavior import (AEBParams, BehaviorKind, BehaviorProfile, IDMParams,
                                     LeadInfo, idm_accel, policy_step)
from junction_bench.evaluation import run_deterministic, run_stochastic
from junction_bench.road_network import Arm, Movement, Turn, straight_route
from junction_bench.scenario import StochasticConfig
from junction_bench.vehicle_sim import (Role, SimConfig, VehicleState, WorldState,
                                        advance_world, track_speed)

cfg = SimConfig()

# %% IDM: a follower at 10 m/s, 17 m behind a same-speed leader, wanting 15 m/s.
print("IDM accel:", idm_accel(10.0, LeadInfo(17.0, 0.0, 1), IDMParams(v0=15.0)))

# %% A follower starting from rest settles behind a 6 m/s leader.
route = straight_route(1000.0)
world = WorldState(0.0, (VehicleState(0, route, 0.0, 0.0),
                         VehicleState(1, route, 40.0, 6.0, v_target=6.0)))
idm = BehaviorProfile(BehaviorKind.IDM, IDMParams(horizon=100.0))
for step in range(601):
    acc = policy_step(world, world.get(0), idm, 0.0, cfg)
    if step % 100 == 0:
        f, l = world.get(0), world.get(1)
        print(f"t={world.time:5.1f}s follower v={f.v:5.2f} gap={l.s - f.s:6.2f} acc={acc:+.4f}")
    world = advance_world(world, {0: acc, 1: track_speed(world.get(1).v, 6.0, cfg)}, cfg)

# %% AEB: cruising at 15 m/s towards a stopped car; it brakes once the
# detection box (length L ahead of the bumper) reaches the obstacle.
aeb = BehaviorProfile.speed_track_aeb(AEBParams(28.0, 1.0, 8.0))
world = WorldState(0.0, (VehicleState(0, route, 0.0, 15.0, v_target=15.0, profile=aeb),
                         VehicleState(1, route, 120.0, 0.0, v_target=0.0, role=Role.EGO)))
while world.get(0).v > 0 or world.time < 1:
    cmd = policy_step(world, world.get(0), aeb, 15.0, cfg)
    world = advance_world(world, {0: cmd, 1: 0.0}, cfg)
print(f"stopped {world.get(1).s - world.get(0).s:.2f} m center-to-center behind the obstacle")

# %% Both drivers on a coarse slice of the deterministic grid (4 cells per scenario).
grid = {"speed_range": (10.0, 40.0), "gap_range": (16.0, 46.0), "step": 30.0}
for agent in (IDMAgent(), AEBAgent()):
    rep = run_deterministic(agent, logical_overrides=grid)
    print(agent.label, {k: f"{m.success_rate:.0f}%" for k, m in rep.by_task().items()})

# %% And on 30 episodes of the stochastic straight test.
sto = StochasticConfig(Movement(Arm.SOUTH, Turn.STRAIGHT))
for agent in (IDMAgent(), AEBAgent()):
    m = run_stochastic(agent, sto, n=30, seed=0).metrics()["straight"]
    print(agent.label, m)
