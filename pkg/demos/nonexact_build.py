"""The recursive build: cubic covers, long cycles and attached copies.

Run: python3 demos/nonexact_build.py
"""
from urslab.constructions import build_nonexact

b = build_nonexact(2, seed=0)
for i in sorted(b.G):
    print(f"G{i}: {len(b.G[i])} vertices")
print("radii:", b.T)
print("checks:", b.check())
print("boundary of the top copy in G5:", b.top_copy_boundary(5))
print()
print(b.manifest())
