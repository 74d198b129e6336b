"""Cycles split into small pieces cheaply; large-girth cubic graphs do not.

Run: python3 demos/hyperfinite_contrast.py
"""
from urslab.constructions import cycle, random_cubic
from urslab.sofic import bs_distance, bs_histogram, hyperfinite_decompose

K = 50
for n in (100, 500):
    d = hyperfinite_decompose(cycle(n), K)
    print(f"C{n}: remove {len(d.removed)} edges, fraction {float(d.removed_fraction):.3f}")

g, rep = random_cubic(500, girth_target=6, seed=0)
print(f"cubic graph: {rep}")
d = hyperfinite_decompose(g, K)
print(f"cubic n=500, K={K}: fraction {float(d.removed_fraction):.3f}")

# two long cycles cannot be told apart by their radius-3 balls
h1 = bs_histogram(cycle(500), 3)
h2 = bs_histogram(cycle(64), 3)
print("BS distance C500 vs C64 at r=3:", bs_distance(h1, h2))
