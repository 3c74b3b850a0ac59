"""How the choice of mirror map shapes the projected policy.

The same score vector is pushed through each potential's projection.  The
entropy map keeps every action alive, the Euclidean and Tsallis (q > 1) maps
zero out weak actions, and the bisection projection reproduces the closed
forms where they exist.
"""
import numpy as np

from ampo.mirror_maps import parse_mirror_map
from ampo.projection import project, project_bisection

scores = np.array([2.0, 1.2, 0.3, -0.5, -2.0])
np.set_printoptions(precision=4, suppress=True)

for token in ("entropy", "l2", "eps-entropy:0.1", "tsallis:2", "tsallis:0.5", "hyperbolic:1", "tanh"):
    p = parse_mirror_map(token)
    res = project(scores, p)
    zeros = int(np.sum(res.dist == 0))
    print(f"{token:16s} {res.dist}  lambda={res.lam:+.4f}  zeroed={zeros}")

print("\nbisection vs closed form (l1 error)")
for token in ("entropy", "l2", "eps-entropy:0.1"):
    p = parse_mirror_map(token)
    err = np.abs(project_bisection(scores, p, 1e-12).dist - project(scores, p).dist).sum()
    print(f"  {token:16s} {err:.2e}")
