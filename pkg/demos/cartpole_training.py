"""Train an AMPO actor-critic on CartPole and print its learning curve.

A few seeds run in parallel threads.  Returns reach the 500-step cap in
well under the default training budget with the entropy map.
"""
import sys

import numpy as np

from ampo.control import ControlConfig, final_window_mean, train_seeds

env = sys.argv[1] if len(sys.argv) > 1 else "cartpole"
mirror = sys.argv[2] if len(sys.argv) > 2 else "entropy"
cfg = ControlConfig(env=env, mirror=mirror, total_steps=200_000)
results = train_seeds(cfg, seeds=range(3), workers=3)

curve = np.nanmean([r.returns for r in results], axis=0)
steps = results[0].steps
for u in range(0, len(curve), max(1, len(curve) // 12)):
    print(f"{steps[u]:7d} steps  mean return {curve[u]:8.1f}")
print("final-window mean per seed:", [round(final_window_mean(r), 1) for r in results])
