"""Decay of the Green function as a consistency diagnostic.

The expected discounted visit count g(0, n) decays at the same exponential
rate as the point-to-point survival weight; the ratio of -ln g(0, n) to
n times the decay rate tends to one.  On a constant potential the rate is
known in closed form, so the ratio curve measures nothing but finite-size
effects, which shrink like 1/n.
"""

import math

from killedwalk import green_function_window, make_distribution, sample_environment

s = 0.8
const = make_distribution({"kind": "point", "value": -math.log(s)})
env = sample_environment(const, (-100, 100), seed=0)
rate = math.log(2.0)  # closed form for survival weight 0.8 per visit

print("   n     g(0,n)        -ln g / (n * rate)")
for n in (2, 5, 10, 20, 40, 80):
    g = green_function_window(env, 0, n, (-100, 100))
    ratio = -math.log(g) / (n * rate)
    print(f"  {n:3d}   {g:.6e}   {ratio:.6f}")

offset = math.log(s / math.sqrt(1 - s * s))
print(f"\nThe gap is the n-independent prefactor ln[s/sqrt(1-s^2)] = {offset:+.6f}:")
print("predicted ratio 1 - offset/(n*rate):")
for n in (2, 5, 10, 20, 40, 80):
    print(f"  {n:3d}   {1 + offset / (n * rate):.6f}")

print("\nWith random potentials the same ratio diagnoses the estimators:")
bern = make_distribution({"kind": "finite", "atoms": [[0.0, 0.5], [1.0, 0.5]]})
env = sample_environment(bern, (-100, 100), seed=42)
from killedwalk import two_point_a

for n in (5, 10, 20, 40):
    g = green_function_window(env, 0, n, (-100, 100))
    a = two_point_a(env, 0, n, -100)
    print(f"  n={n:3d}: -ln g = {-math.log(g):8.4f} vs point-to-point cost a = {a:8.4f} "
          f"(ratio {-math.log(g)/a:.4f})")
