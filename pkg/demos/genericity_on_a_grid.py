"""Uncolored periodic windows are never generic; a product coloring fixes that.

Run: python3 demos/genericity_on_a_grid.py
"""
from urslab.constructions import cycle, grid_edges, product_colored_schreier
from urslab.urs import genericity_radius

# every vertex of a cycle looks like every other one, at any radius
for S in (0, 2, 4):
    cert = genericity_radius(cycle(8), None, R=2, S_max=S)
    print(f"C8, S_max={S}: certified={cert.certified} counterexample={cert.counterexample}")

# a 40x40 grid window, edges recolored by (vertex color pair, direction)
w = h = 40
edges, cols = grid_edges(w, h)
border = [j * w + i for j in range(h) for i in range(w) if i in (0, w - 1) or j in (0, h - 1)]
g, palette, rho = product_colored_schreier(w * h, edges, cols, seed=0, open_vertices=border)
print(f"grid {w}x{h}: {len(palette)} edge labels from a {len(set(rho.values))}-color vertex coloring")

cert = genericity_radius(g, None, R=3, S_max=10)
print(cert.to_text())
