"""Training the TD3 baseline.

The first cell trains a left turn on an empty junction, which takes a couple
of minutes on one core. The second evaluates the full-budget straight-task
actor from artifacts/ when it exists.

    python demos/04_td3_training.py
"""
# %%
import logging
import time
from pathlib import Path

from junction_bench import IntersectionEnv, StochasticConfig, training_scenario
from junction_bench.agents import ActorAgent, AEBAgent, IDMAgent
from junction_bench.evaluation import run_stochastic
from junction_bench.learner import TD3Config, load_actor, train
from junction_bench.road_network import Arm, Movement, Turn

logging.basicConfig(level=logging.INFO, format="%(message)s")

t0 = time.time()
curve, agent = train(IntersectionEnv, training_scenario(Turn.LEFT, with_traffic=False),
                     TD3Config(dtype="float32"), episodes=3000, seed=0, progress_every=20,
                     stop_when=lambda c: len(c.rows) >= 100 and c.moving_success >= 0.9)
print(f"{len(curve.rows)} episodes, moving success {curve.moving_success:.2f}, "
      f"{time.time() - t0:.0f} s")

# %% The full-budget straight actor against the rule-based drivers.
actor = Path(__file__).resolve().parents[1] / "artifacts" / "td3_straight_s0" / "actor.bin"
if actor.exists():
    sto = StochasticConfig(Movement(Arm.SOUTH, Turn.STRAIGHT))
    for a in (IDMAgent(), AEBAgent(), ActorAgent(load_actor(actor))):
        m = run_stochastic(a, sto, n=200, seed=0).metrics()["straight"]
        print(f"{a.label}: {m.success_rate:.1f}% success, avg time {m.avg_time}")
else:
    print("no trained straight actor; run python artifacts/train_straight.py")
