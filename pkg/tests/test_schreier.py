from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_schreier_table, rooted_isomorphic
from urslab import FrontierError
from urslab.constructions import cycle, grid, path
from urslab.schreier import (GeneratorSet, Graph, automorphism_transport, ball_code, distances,
                             extract_ball, is_connected, root_change, schreier_distance)


def test_generator_set_pairing():
    g = GeneratorSet.free(2)
    assert g.names == ("a", "A", "b", "B")
    assert g.inverse_word("ab") == (3, 1)
    assert not g.is_involution(0)
    inv = GeneratorSet.involutions(3)
    assert all(inv.is_involution(i) for i in range(3))
    with pytest.raises(ValueError):
        GeneratorSet(["a", "b"], [1, 1])
    with pytest.raises(ValueError):
        GeneratorSet(["a b"], [0])


def test_graph_rejects_bad_rows():
    gens = GeneratorSet.free(1)
    with pytest.raises(ValueError):
        Graph(gens, [[0]])
    with pytest.raises(ValueError):
        Graph(gens, [[5, 0]])


def test_frontier_transition_raises():
    g = grid(3, 3)
    corner = g.index_of_coord((0, 0))
    with pytest.raises(FrontierError):
        g.neighbor(corner, g.gens.index("X"))
    centre = g.index_of_coord((1, 1))
    assert g.is_complete(centre)
    with pytest.raises(FrontierError):
        extract_ball(g, centre, 2)


def test_cycle_ball_sizes():
    c = cycle(8)
    for r, size in [(0, 1), (1, 3), (2, 5), (3, 7), (4, 8)]:
        assert len(extract_ball(c, 0, r)) == size


@pytest.mark.parametrize("r", range(0, 8))
def test_grid_diamond_counts(r):
    # BFS oracle: |{(i, j): |i| + |j| <= r}|
    expected = sum(1 for i in range(-r, r + 1) for j in range(-r, r + 1) if abs(i) + abs(j) <= r)
    assert expected == 2 * r * r + 2 * r + 1
    assert len(extract_ball(grid(), (0, 0), r)) == expected


def test_cycle_distance_uses_first_disagreement():
    # balls of C_8 and C_16 agree up to radius 3 and differ at radius 4
    d = schreier_distance(cycle(8), 0, cycle(16), 0, r_max=10)
    assert d == Fraction(1, 8)
    assert schreier_distance(cycle(8), 0, cycle(8), 3, r_max=10) == 0


def test_distance_root_colors_differ():
    a = cycle(4).with_colors([0, 0, 0, 0])
    b = cycle(4).with_colors([1, 0, 0, 0])
    assert schreier_distance(a, 0, b, 0, r_max=5) == 2


def test_root_change_walks_left_to_right():
    c = cycle(8)
    assert root_change(c, 0, "sss") == 3
    assert root_change(c, 0, "sS") == 0
    g = grid()
    assert root_change(g, (0, 0), "xxy") == (2, 1)


def test_rotation_is_an_automorphism():
    ok, phi = automorphism_transport(cycle(8), 0, 3)
    assert ok
    assert phi == [(v + 3) % 8 for v in range(8)]
    p = path(6)
    ok, _ = automorphism_transport(p, 0, 1)
    assert not ok


def test_distances_and_connectivity():
    c = cycle(10)
    d = distances(c, 0)
    assert max(d.values()) == 5
    assert is_connected(c)
    two = Graph(GeneratorSet.involutions(1), [[1], [0], [3], [2]])
    assert not is_connected(two)


def test_sub_ball_matches_direct_extraction():
    g = grid()
    big = extract_ball(g, (0, 0), 5)
    for i in range(len(big)):
        if big.dist[i] <= 2:
            sub = big.sub_ball(i, 3)
            direct = extract_ball(g, big_coord(g, big, i), 3)
            assert ball_code(sub) == ball_code(direct)


def big_coord(g, ball, i):
    # the ball stores coordinates of a lazy view as its vertices
    return ball.vertices[i]


def test_exact_and_hashed_codes_agree_on_equality():
    c8, c16 = cycle(8), cycle(16)
    for r in range(6):
        e = ball_code(extract_ball(c8, 0, r), exact=True) == ball_code(extract_ball(c16, 0, r), exact=True)
        h = ball_code(extract_ball(c8, 0, r)) == ball_code(extract_ball(c16, 0, r))
        assert e == h == (r <= 3)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.integers(0, 3))
def test_ball_code_equality_is_rooted_isomorphism(seed, n, r):
    rng = np.random.default_rng(seed)
    t1 = random_schreier_table(rng, n)
    t2 = random_schreier_table(rng, n)
    c1 = [int(x) for x in rng.integers(0, 2, n)]
    c2 = [int(x) for x in rng.integers(0, 2, n)]
    g1 = Graph(GeneratorSet(["a", "A", "i"], [1, 0, 2]), t1, colors=c1)
    g2 = Graph(GeneratorSet(["a", "A", "i"], [1, 0, 2]), t2, colors=c2)
    for v in range(n):
        for w in range(n):
            same = ball_code(extract_ball(g1, v, r)) == ball_code(extract_ball(g2, w, r))
            assert same == rooted_isomorphic(t1, c1, v, t2, c2, w, r)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_walk_inverse_returns(seed, n):
    rng = np.random.default_rng(seed)
    g = Graph(GeneratorSet(["a", "A", "i"], [1, 0, 2]), random_schreier_table(rng, n))
    g.check()
    word = [int(x) for x in rng.integers(0, 3, 6)]
    for v in range(n):
        u = root_change(g, v, word)
        assert root_change(g, u, g.gens.inverse_word(word)) == v
