"""Nonrepetitive vertex colorings and the colorings derived from them.

A path ``x_1 .. x_2n`` in the underlying simple graph is *repetitive* when
``c(x_i) == c(x_{n+i})`` for every ``i``.  Searches are exhaustive up to a
half-length ``n_max``; that scale is recorded on every verified coloring.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal, localcontext
from typing import Iterable, Sequence

from ._util import BudgetExceeded, UrsLabError, as_budget, rng_stream
from .schreier import Graph, distances

__all__ = [
    "Coloring",
    "RepetitionWitness",
    "DoublingMaps",
    "ResampleBudgetExceeded",
    "find_repetitive_path",
    "verify_witness",
    "path_from_automorphism",
    "lll_alphabet_bound",
    "nonrepetitive_color",
    "genericity_product_coloring",
    "decode_product_coloring",
    "distance_proper_coloring",
    "is_distance_proper",
    "compression_coloring",
    "decode_compression",
    "STAR",
]

STAR = "*"


@dataclass
class Coloring:
    """Vertex colors of a graph window.

    ``values[v]`` is the color of vertex ``v`` (``None`` outside the window).
    The verification fields are only filled in by the verifying operations.
    """

    values: list
    alphabet: tuple = ()
    nonrepetitive_upto: int | None = None
    proper_distance: int | None = None

    def __post_init__(self):
        self.values = list(self.values)
        if not self.alphabet:
            self.alphabet = tuple(sorted({c for c in self.values if c is not None}, key=repr))

    def __getitem__(self, v):
        return self.values[v]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class RepetitionWitness:
    path: tuple
    n: int


@dataclass
class DoublingMaps:
    """Two injective partial maps with disjoint images, displacement ``<= C``."""

    phi1: dict
    phi2: dict
    C: int
    domain: tuple = field(default_factory=tuple)


class ResampleBudgetExceeded(BudgetExceeded):
    """Resampling gave up; carries the last coloring and an open witness."""

    def __init__(self, msg, coloring=None, witness=None):
        super().__init__(msg)
        self.coloring = coloring
        self.witness = witness


def _vals(coloring):
    return coloring.values if isinstance(coloring, Coloring) else list(coloring)


def _adjacency(view):
    if isinstance(view, Graph):
        return view.adjacency()
    return [list(a) for a in view]


def _ball_by_distance(adj, s, r):
    """``(vertex, distance)`` pairs of the radius-``r`` ball, sorted by distance."""
    dist = {s: 0}
    frontier = [s]
    for d in range(1, r + 1):
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in dist:
                    dist[y] = d
                    nxt.append(y)
        frontier = nxt
    return list(dist.items())


def _search_from(adj, col, s, n_lo, n_hi, budget, ball=None):
    """Repetitive path of half-length in ``[n_lo, n_hi]`` starting at ``s``,
    preferring the smallest half-length.  Returns a vertex list or None.

    A path ``x_1 .. x_2h`` is repetitive iff the pairs ``(x_j, x_{j+h})``
    form a walk of equal-colored pairs, closed by the edge ``x_h x_{h+1}``.
    Walking both halves in lockstep prunes on color at every step.
    """
    cs = col[s]
    if cs is None:
        return None
    # x_{h+1} lies at path distance h from s; ``ball`` may be cached by the caller
    if ball is None:
        ball = _ball_by_distance(adj, s, n_hi)
    partners = [(w, d) for w, d in ball if d >= 1 and col[w] == cs]
    if not partners:
        return None
    best = [None]
    limit = [n_hi]
    p1 = [s]
    p2 = []
    on = {s}

    def walk():
        h = len(p1)
        w = p2[0]
        if h >= n_lo and w in adj[p1[-1]]:
            best[0] = p1 + p2
            limit[0] = h - 1
            return
        if h >= limit[0]:
            return
        budget.check("repetition search")
        a, b = p1[-1], p2[-1]
        for y in adj[a]:
            cy = col[y]
            if cy is None or y in on:
                continue
            for z in adj[b]:
                if z == y or z in on or col[z] != cy:
                    continue
                p1.append(y)
                p2.append(z)
                on.add(y)
                on.add(z)
                walk()
                on.discard(y)
                on.discard(z)
                p1.pop()
                p2.pop()
                if len(p1) >= limit[0]:
                    return

    for w, d in partners:
        if d > limit[0]:
            break
        p2.append(w)
        on.add(w)
        walk()
        on.discard(w)
        p2.pop()
    return best[0]


def find_repetitive_path(view, coloring, window: Iterable[int] | None = None, n_max: int = 1,
                         budget_ms: float | None = None) -> RepetitionWitness | None:
    """Shortest repetitive path with half-length ``<= n_max`` starting in ``window``.

    The search is an exhaustive DFS over simple paths of the materialized
    graph.  Returns None when no such path exists at this scale.
    """
    adj = _adjacency(view)
    col = _vals(coloring)
    if len(col) != len(adj):
        raise UrsLabError("coloring does not cover the graph")
    starts = range(len(adj)) if window is None else list(window)
    for s in starts:
        if not 0 <= s < len(adj):
            raise UrsLabError(f"window vertex {s} is not materialized")
    budget = as_budget(budget_ms)
    best = None
    hi = n_max
    for s in starts:
        if hi < 1:
            break
        p = _search_from(adj, col, s, 1, hi, budget)
        if p is not None:
            best = p
            hi = len(p) // 2 - 1
    if best is None:
        return None
    return RepetitionWitness(tuple(best), len(best) // 2)


def verify_witness(view, coloring, w: RepetitionWitness) -> bool:
    """Structural check of a witness, independent of any search."""
    adj = _adjacency(view)
    col = _vals(coloring)
    p = list(w.path)
    n = w.n
    if n < 1 or len(p) != 2 * n:
        return False
    if len(set(p)) != len(p):
        return False
    if any(not 0 <= v < len(adj) for v in p):
        return False
    for a, b in zip(p, p[1:]):
        if b not in adj[a]:
            return False
    return all(col[p[i]] is not None and col[p[i]] == col[p[n + i]] for i in range(n))


def path_from_automorphism(view: Graph, theta: Sequence[int]) -> RepetitionWitness:
    """Repetitive path forced by a fixed-point-free colored-labeled automorphism.

    Picks ``a`` minimizing ``d(a, theta(a))``, walks a shortest path to
    ``theta(a)`` and repeats its label sequence once more.  The colors of
    the two halves agree because ``theta`` preserves labels and colors.
    """
    n_vert = len(view)
    best = None
    for a in range(n_vert):
        if theta[a] == a:
            raise UrsLabError("automorphism has a fixed point")
        d = distances(view, a).get(theta[a])
        if d is None:
            raise UrsLabError("view is not connected")
        if best is None or d < best[0]:
            best = (d, a)
    n, a = best
    # labeled shortest path a -> theta(a)
    target = theta[a]
    parent = {a: None}
    queue = deque([a])
    while queue and target not in parent:
        x = queue.popleft()
        for g, t in view.moves(x):
            if t not in parent:
                parent[t] = (x, g)
                queue.append(t)
    labels = []
    x = target
    while parent[x] is not None:
        x, g = parent[x]
        labels.append(g)
    labels.reverse()
    walk = [a]
    for g in labels:
        walk.append(view.neighbor(walk[-1], g))
    for g in labels[:-1]:
        walk.append(view.neighbor(walk[-1], g))
    return RepetitionWitness(tuple(walk), n)


def lll_alphabet_bound(d: int) -> int:
    """Alphabet size ``ceil(2 d^2 e^16)`` sufficient for the Local Lemma."""
    if d < 1:
        raise ValueError("degree bound must be at least 1")
    with localcontext() as ctx:
        ctx.prec = 60
        val = 2 * Decimal(d) ** 2 * Decimal(16).exp()
        return int(val.to_integral_value(rounding=ROUND_CEILING))


def _ball_vertices(adj, sources, r):
    seen = set(sources)
    frontier = list(sources)
    for _ in range(r):
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return seen


def nonrepetitive_color(view, window: Iterable[int] | None = None, k: int = 4, n_max: int = 4,
                        seed: int = 0, max_resamples: int = 100_000,
                        budget_ms: float | None = None, method: str = "resample") -> Coloring:
    """Coloring of ``view`` with ``k`` colors and no repetitive path of
    half-length ``<= n_max`` starting in ``window``.

    ``method="resample"`` runs Moser-Tardos resampling over the events
    "this path is repetitive": while a bad path exists, all of its vertices
    get fresh uniform colors.  ``method="backtrack"`` colors vertices in
    order and, when the newest color closes a repetitive path, recolors the
    second half of that path (an entropy-compression style search); it is
    the better choice for very small alphabets.

    The result is re-verified with :func:`find_repetitive_path` before it is
    returned.  Raises :class:`ResampleBudgetExceeded` when ``max_resamples``
    or ``budget_ms`` run out.
    """
    if k < 1:
        raise ValueError("alphabet must be non-empty")
    adj = _adjacency(view)
    n = len(adj)
    win = list(range(n)) if window is None else sorted(set(window))
    budget = as_budget(budget_ms)
    rng = rng_stream(seed, "nonrepetitive_color")
    if method == "resample":
        col = _resample(adj, win, k, n_max, rng, max_resamples, budget)
    elif method == "backtrack":
        col = _backtrack(adj, win, k, n_max, rng, max_resamples, budget)
    else:
        raise ValueError(f"unknown method {method!r}")
    w = find_repetitive_path(adj, col, win, n_max)
    if w is not None:
        raise UrsLabError("internal error: final verification found a repetitive path")
    return Coloring(col, tuple(range(k)), nonrepetitive_upto=n_max)


def _resample(adj, win, k, n_max, rng, max_resamples, budget):
    n = len(adj)
    col = [int(c) for c in rng.integers(0, k, size=n)]
    in_win = set(win)
    work = deque(win)
    queued = set(win)
    resamples = 0
    balls = {}
    while work:
        s = work.popleft()
        queued.discard(s)
        if s not in balls:
            balls[s] = _ball_by_distance(adj, s, n_max)
        try:
            p = _search_from(adj, col, s, 1, n_max, budget, balls[s])
        except BudgetExceeded as exc:
            raise ResampleBudgetExceeded(str(exc), Coloring(col, tuple(range(k)))) from None
        if p is None:
            continue
        if resamples >= max_resamples or budget.expired():
            raise ResampleBudgetExceeded(
                f"gave up after {resamples} resamples", Coloring(col, tuple(range(k))),
                RepetitionWitness(tuple(p), len(p) // 2))
        resamples += 1
        for v in p:
            col[v] = int(rng.integers(0, k))
        for v in _ball_vertices(adj, p, 2 * n_max - 1):
            if v in in_win and v not in queued:
                queued.add(v)
                work.append(v)
        if s not in queued:
            queued.add(s)
            work.append(s)
    return col


def _backtrack(adj, win, k, n_max, rng, max_resamples, budget):
    # order: BFS from each window component so partial colorings stay local
    n = len(adj)
    order = []
    seen = set()
    for s in win:
        if s in seen:
            continue
        seen.add(s)
        q = deque([s])
        while q:
            x = q.popleft()
            order.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    q.append(y)
    col = [None] * n
    pos = {v: i for i, v in enumerate(order)}
    i = 0
    steps = 0
    while i < len(order):
        v = order[i]
        col[v] = int(rng.integers(0, k))
        p = _closing_repetition(adj, col, v, n_max, budget)
        if p is None:
            i += 1
            continue
        steps += 1
        if steps > max_resamples or budget.expired():
            raise ResampleBudgetExceeded(f"gave up after {steps} backtracks",
                                         Coloring(col, tuple(range(k))),
                                         RepetitionWitness(tuple(p), len(p) // 2))
        # erase the half of the repetition that contains v (the later half in the order)
        half = len(p) // 2
        a, b = p[:half], p[half:]
        drop = b if v in b else a
        for u in drop:
            col[u] = None
        i = min(pos[u] for u in drop)
    return col


def _closing_repetition(adj, col, v, n_max, budget):
    """A repetitive path through ``v`` among colored vertices, if any."""
    best = None
    for s in _ball_vertices(adj, [v], 2 * n_max - 1):
        if col[s] is None:
            continue
        p = _search_from(adj, col, s, 1, n_max, budget)
        if p is not None and v in p and (best is None or len(p) < len(best)):
            best = p
    return best


def genericity_product_coloring(edges: Sequence[tuple[int, int]], edge_colors: Sequence,
                                rho: Sequence) -> list:
    """Edge coloring ``zeta(e) = ({rho(x), rho(y)}, c(e))``.

    ``edges`` and ``edge_colors`` are aligned lists; ``rho`` is a proper
    vertex coloring.  Raises if ``rho`` is not proper or ``c`` is not a
    proper edge coloring.
    """
    rho = _vals(rho)
    seen = {}
    out = []
    for (x, y), c in zip(edges, edge_colors):
        if rho[x] == rho[y]:
            raise UrsLabError(f"vertex coloring not proper on edge ({x}, {y})")
        for v in (x, y):
            if (v, c) in seen:
                raise UrsLabError(f"edge coloring not proper at vertex {v}")
            seen[(v, c)] = True
        out.append((frozenset((rho[x], rho[y])), c))
    return out


def decode_product_coloring(view: Graph, palette: Sequence) -> list:
    """Recover the vertex coloring from the product edge labels alone.

    ``palette[g]`` is the edge color carried by involution label ``g``.  A
    vertex whose incident pair-sets meet in a single color gets that color;
    the remaining vertices (degree one, or all neighbours sharing a color)
    take the member of an incident pair not used by an already decoded
    neighbour.  Returns ``None`` entries where nothing is determined.
    """
    n = len(view)
    out = [None] * n
    inc = []
    for v in range(n):
        pairs = []
        for g, t in view.moves(v) if view.is_complete(v) else _known_moves(view, v):
            pairs.append((t, palette[g][0]))
        inc.append(pairs)
        if pairs:
            common = set(pairs[0][1])
            for _, s in pairs[1:]:
                common &= set(s)
            if len(common) == 1:
                out[v] = next(iter(common))
    changed = True
    while changed:
        changed = False
        for v in range(n):
            if out[v] is not None:
                continue
            for t, s in inc[v]:
                if out[t] is not None and out[t] in s:
                    (other,) = set(s) - {out[t]}
                    out[v] = other
                    changed = True
                    break
    return out


def _known_moves(view: Graph, v: int):
    return [(g, t) for g, t in enumerate(view.table[v]) if t >= 0 and t != v]


def distance_proper_coloring(view, window: Iterable[int] | None = None, D: int = 1) -> Coloring:
    """Greedy coloring in which window vertices at distance ``1..D`` differ.

    Vertices are colored in BFS order from the first window vertex (each
    further component from its own smallest vertex), taking the least color
    not already used within distance ``D``.
    """
    adj = _adjacency(view)
    n = len(adj)
    win = list(range(n)) if window is None else list(window)
    in_win = set(win)
    order = []
    seen = set()
    for s in win:
        if s in seen:
            continue
        seen.add(s)
        q = deque([s])
        while q:
            x = q.popleft()
            order.append(x)
            for y in adj[x]:
                if y in in_win and y not in seen:
                    seen.add(y)
                    q.append(y)
    col = [None] * n
    for v in order:
        if D <= 0:
            col[v] = 0
            continue
        used = {col[u] for u in _ball_vertices(adj, [v], D) if u != v and col[u] is not None}
        c = 0
        while c in used:
            c += 1
        col[v] = c
    return Coloring(col, tuple(sorted({c for c in col if c is not None})), proper_distance=D)


def is_distance_proper(view, coloring, D: int, window: Iterable[int] | None = None) -> bool:
    adj = _adjacency(view)
    col = _vals(coloring)
    win = range(len(adj)) if window is None else list(window)
    in_win = set(win)
    for v in win:
        for u in _ball_vertices(adj, [v], D):
            if u != v and u in in_win and col[u] == col[v]:
                return False
    return True


def compression_coloring(view, window: Iterable[int], dm: DoublingMaps, c1, c2) -> list:
    """Four-component coloring ``(c1, c2, c3, c4)`` that encodes ``phi1, phi2``.

    ``c3(q) = (c2(p), 1)`` when ``phi1(p) = q`` and ``*`` otherwise; ``c4``
    likewise for ``phi2`` with tag 2.  ``c2`` must be proper at distance
    ``3 C`` for the encoding to be decodable.
    """
    c1 = _vals(c1)
    c2 = _vals(c2)
    n = len(c1)
    c3 = [STAR] * n
    c4 = [STAR] * n
    for phi, comp, tag in ((dm.phi1, c3, 1), (dm.phi2, c4, 2)):
        for p, q in phi.items():
            if comp[q] != STAR:
                raise UrsLabError(f"vertex {q} has two preimages under phi{tag}")
            comp[q] = (c2[p], tag)
    win = set(window)
    return [(c1[v], c2[v], c3[v], c4[v]) if v in win else None for v in range(n)]


def decode_compression(view, colors: Sequence, x: int, C: int) -> tuple[int, int]:
    """Read ``(phi1(x), phi2(x))`` back from a compression coloring."""
    adj = _adjacency(view)
    if colors[x] is None:
        raise UrsLabError(f"vertex {x} is not colored")
    e = colors[x][1]
    near = _ball_vertices(adj, [x], C)
    out = []
    for slot, tag in ((2, 1), (3, 2)):
        hits = [v for v in near if colors[v] is not None and colors[v][slot] == (e, tag)]
        if len(hits) != 1:
            raise UrsLabError(f"{len(hits)} candidates for phi{tag}({x}) within distance {C}")
        out.append(hits[0])
    return out[0], out[1]
