import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import girth_bruteforce
from urslab import UrsLabError
from urslab.constructions import (BUILD_GENS, build_nonexact, cycle, cycle_cover_tower, girth,
                                  graph_to_involution_schreier, grid, grid_edges, is_covering,
                                  large_girth_sequence, path, product_colored_schreier, random_cubic,
                                  regular_tree, tree_ray_encoding, voltage_cover,
                                  voltage_z2_cover, voltage_z2_tower)
from urslab.schreier import distances, is_connected


def test_small_families():
    assert len(cycle(7)) == 7 and cycle(7).is_total
    p = path(5)
    assert p.is_total and is_connected(p)
    g = grid(4, 3)
    assert len(g) == 12 and not g.is_total
    t = regular_tree(3, 3)
    assert len(t) == 1 + 3 + 6 + 12


def test_c4_two_colors_gives_involutions():
    edges = [(0, 1), (1, 2), (2, 3), (3, 0)]
    g, palette = graph_to_involution_schreier(4, edges, ["r", "b", "r", "b"])
    assert len(g.gens) == 2 and palette == ["b", "r"]
    assert g.is_total
    for v in range(4):
        for k in range(2):
            assert g.table[g.table[v][k]][k] == v


def test_improper_edge_coloring_is_rejected():
    with pytest.raises(UrsLabError):
        graph_to_involution_schreier(3, [(0, 1), (1, 2)], ["r", "r"])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9))
def test_forgetting_loops_recovers_edges(seed, n):
    rng = np.random.default_rng(seed)
    pairs = [(x, y) for x, y in itertools.combinations(range(n), 2) if rng.random() < 0.4]
    # greedy proper coloring of the edges
    cols, used = [], {}
    for x, y in pairs:
        c = 0
        while c in used.get(x, set()) or c in used.get(y, set()):
            c += 1
        cols.append(c)
        used.setdefault(x, set()).add(c)
        used.setdefault(y, set()).add(c)
    g, pal = graph_to_involution_schreier(n, pairs, cols)
    back = {(min(v, t), max(v, t)) for v in range(n) for t in g.table[v] if t != v}
    assert back == set(pairs)


def test_product_coloring_palette():
    edges, cols = grid_edges(6, 6)
    g, palette, rho = product_colored_schreier(36, edges, cols, seed=2)
    for (x, y), c in zip(edges, cols):
        k = g.table[x].index(y)
        pair, orig = palette[k]
        assert orig == c
        assert set(pair) == {rho.values[x], rho.values[y]}


def test_random_cubic_on_four_vertices_is_k4():
    g, rep = random_cubic(4, 3, seed=1)
    assert rep.met
    nb = {v: set(g.table[v]) for v in range(4)}
    assert all(nb[v] == set(range(4)) - {v} for v in range(4))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 9), st.floats(0.2, 0.6))
def test_girth_matches_cycle_enumeration(seed, n, p):
    rng = np.random.default_rng(seed)
    edges = [(x, y) for x, y in itertools.combinations(range(n), 2) if rng.random() < p]
    if rng.random() < 0.3 and edges:
        edges.append(edges[0])
    assert girth(n, edges) == girth_bruteforce(n, edges)


def test_large_girth_sequence_meets_target():
    graphs, reps = large_girth_sequence([50, 200], girth_target=5, seed=3)
    for g, rep in zip(graphs, reps):
        assert rep.met
        assert girth(len(g), g.edges()) >= 5
        assert all(len(set(g.table[v])) == 3 for v in range(len(g)))


def test_k4_double_cover():
    k4, _ = random_cubic(4, 3, seed=1)
    cov, proj, _ = voltage_z2_cover(k4, seed=5)
    assert len(cov) == 8
    assert is_connected(cov)
    assert all(len(set(cov.table[v])) == 3 for v in range(8))
    assert is_covering(cov, k4, proj)


def test_cycle_tower_fibers():
    tower = cycle_cover_tower(2)
    assert [len(c) for c in tower.levels] == [4, 8]
    assert tower.check()
    proj = tower.projection(1, 0)
    assert sorted(np.bincount(proj).tolist()) == [2, 2, 2, 2]


def test_voltage_tower_composes():
    base, _ = random_cubic(10, 3, seed=0)
    tower = voltage_z2_tower(base, 4, seed=1)
    assert tower.check()
    assert [len(g) for g in tower.levels] == [10, 20, 40, 80]
    assert is_covering(tower.levels[3], base, tower.projection(3, 0))


def test_is_covering_rejects_bad_maps():
    c8, c4 = cycle(8), cycle(4)
    assert is_covering(c8, c4, [v % 4 for v in range(8)])
    assert not is_covering(c8, c4, [0] * 8)
    assert not is_covering(cycle(6), c4, [v % 4 for v in range(6)])


def test_voltage_cover_bits():
    base, _ = random_cubic(12, 3, seed=4)
    cov, proj, _ = voltage_cover(base, 3, seed=2)
    assert len(cov) == 96 and is_covering(cov, base, proj)


def test_tree_decoder_recovers_direction():
    enc = tree_ray_encoding(8)
    for v in enc.interior:
        assert enc.decode(v) == enc.phi[v]


def test_distance3_base_coloring():
    enc = tree_ray_encoding(6)
    g = enc.graph
    edges = list(enc.base)
    for e, f in itertools.combinations(edges, 2):
        if enc.base[e] != enc.base[f]:
            continue
        d = min(distances(g, x, max_r=3).get(y, 99) for x in e for y in f)
        assert d >= 2


def test_build_depth_one():
    b = build_nonexact(1, seed=0)
    assert len(b.G[1]) == 4 and len(b.H[1]) == 8
    assert len(b.H[2]) >= 40
    assert all(b.check().values())


def test_build_depth_two_invariants_and_sizes():
    b = build_nonexact(2, seed=1)
    assert all(b.check().values())
    assert b.T[1] < b.T[2]
    for i, marks in b.R.items():
        assert max(marks) == i // 2
    assert b.top_copy_boundary(5) == Fraction(1, len(b.G[2]))
    g = b.union_window()
    assert g.gens == BUILD_GENS and g.is_total


def test_build_manifest_is_reproducible():
    a = build_nonexact(2, seed=7).manifest()
    assert a == build_nonexact(2, seed=7).manifest()
    assert a != build_nonexact(2, seed=8).manifest()


def test_build_rejects_small_overrides():
    with pytest.raises(UrsLabError):
        build_nonexact(2, cycle_exps=[2])
    with pytest.raises(UrsLabError):
        build_nonexact(2, cover_bits=[0])
