"""Local kernels on the grid: products, norm bounds and Folner traces.

Run: python3 demos/kernels_and_traces.py
"""
from urslab.constructions import grid
from urslab.kernels import amenable_trace, kappa, kernel_star, norm_estimate

g = grid()
shift = kappa(g.gens, "x")
lap = shift + kernel_star(shift) + kappa(g.gens, "y") + kernel_star(kappa(g.gens, "y"))

ne = norm_estimate(lap, g, [g.ball_coords((0, 0), r) for r in (4, 12)])
print(f"adjacency operator norm in [{ne.lower:.4f}, {ne.upper:.4f}]")

# commutator defects shrink as the windows grow
rep = amenable_trace(shift, g, [g.ball_coords((0, 0), r) for r in (2, 8, 32)])
for w in rep.windows:
    print(f"|F|={w.size:5d}  tau={w.value.real:.3f}  defect={w.defect:.4f}  bound={w.defect_bound:.4f}")
