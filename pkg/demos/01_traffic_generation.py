"""Where the training traffic comes from.

Each training flow draws its next vehicle's target speed from a clipped
Ornstein-Uhlenbeck process, then the gap to the vehicle behind it from a
truncated normal whose mean grows with that speed.

    python demos/01_traffic_generation.py
"""
# %%
import numpy as np

from junction_bench.traffic_gen import (GapSamplerParams, OUParams, ParameterRange,
                                        clipped_ou_step, gap_mean, ou_step, sample_gap)

rng = np.random.default_rng(0)
speeds = ParameterRange(10.0, 40.0)          # km/h
process = OUParams.for_range(speeds)         # mean 25, stationary std 7.5
print(process)

# %% A few consecutive vehicles: speeds wander but revert to the mean.
v = process.mu
for k in range(8):
    v = clipped_ou_step(v, process, speeds, rng)
    print(f"vehicle {k}: {v:5.1f} km/h")

# %% Without clipping, the chain leaves the speed range now and then.
x = np.full(10_000, process.mu)
for _ in range(50):
    x = ou_step(x, process, rng)
print("unclipped share outside [10, 40]:", np.mean((x < 10) | (x > 40)))

# %% Clipping redraws instead of clamping, so nothing piles up on the edges.
x = np.full(10_000, process.mu)
for _ in range(50):
    x = clipped_ou_step(x, process, speeds, rng)
counts, edges = np.histogram(x, bins=10, range=(10, 40))
for c, lo in zip(counts, edges):
    print(f"{lo:4.0f} km/h {'#' * (c // 40)}")

# %% Gaps: faster vehicles keep longer gaps on average.
gaps = GapSamplerParams(16.0, 50.0, 4.0)
for speed in (10.0, 25.0, 40.0):
    d = sample_gap(np.full(20_000, speed), speeds, gaps, rng)
    print(f"{speed:4.0f} km/h: center {gap_mean(speed, speeds, gaps):5.1f} m, "
          f"sampled mean {d.mean():5.1f} m, range [{d.min():.1f}, {d.max():.1f}]")
