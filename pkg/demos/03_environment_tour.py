"""One episode through the RL interface, step by step.

The action is two numbers in [0, 1]; their difference sets the ego target
speed, (a0 - a1 + 1) / 2 * 9 m/s. The observation is 34 numbers: ego speed,
a one-hot of where the ego is (before / inside / after the junction), then
five 6-number blocks for the nearest vehicles in the ego frame.

    python demos/03_environment_tour.py
"""
# %%
import numpy as np

from junction_bench import IntersectionEnv, StochasticConfig
from junction_bench.env import decode_action, encode_target_speed
from junction_bench.road_network import Arm, Movement, Turn

np.set_printoptions(precision=2, suppress=True, linewidth=100)
env = IntersectionEnv()
task = StochasticConfig(Movement(Arm.SOUTH, Turn.LEFT))
obs = env.reset(task, seed=4)
print("ego block:", obs[:4])
print("nearest vehicle (vx, vy, x, y, cos, sin):", obs[4:10])

# %% Creep at 6 m/s for the first 60 m, then go at full speed.
creep, go = encode_target_speed(6.0), (1.0, 0.0)
print("creep target speed:", decode_action(creep))
total = 0.0
while not env.done:
    region = int(np.argmax(obs[1:4]))
    out = env.step(creep if region == 0 and env.ego.s < 60 else go)
    obs, total = out.observation, total + out.reward
    if env.result().steps % 50 == 0 or out.done:
        print(f"t={env.elapsed:5.1f}s s={env.ego.s:6.1f} m v={env.ego.v:4.1f} "
              f"reward so far {total:8.1f} {out.outcome.value}")
print(env.result())

# %% Same seed, same episode: every source of randomness comes from reset.
again = env.reset(task, seed=4)
print("identical first observation:", np.array_equal(again, env.reset(task, seed=4)))
