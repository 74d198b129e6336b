"""Example graph families and the recursive nonexact build.

Every generator is seeded through :func:`urslab._util.rng_stream` so a
family is reproduced bit for bit from ``(seed, parameters)``.
"""
from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._util import UrsLabError, rng_stream
from .coloring import Coloring, genericity_product_coloring, nonrepetitive_color
from .schreier import GeneratorSet, Graph, LazyView

__all__ = [
    "cycle",
    "path",
    "grid",
    "grid_edges",
    "regular_tree",
    "graph_to_involution_schreier",
    "product_colored_schreier",
    "TreeRayEncoding",
    "tree_ray_encoding",
    "girth",
    "GirthReport",
    "random_cubic",
    "large_girth_sequence",
    "CoverTower",
    "is_covering",
    "voltage_cover",
    "voltage_z2_cover",
    "voltage_z2_tower",
    "cycle_cover_tower",
    "NonexactBuild",
    "build_nonexact",
    "table_digest",
]

CYCLE_GENS = GeneratorSet(["s", "S"], [1, 0])
GRID_GENS = GeneratorSet(["x", "X", "y", "Y"], [1, 0, 3, 2])
CUBIC_GENS = GeneratorSet.involutions(3, ["a", "b", "c"])
PATH_GENS = GeneratorSet.involutions(2, ["a", "b"])


def table_digest(table, colors=None) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.ascontiguousarray(np.asarray(table, dtype=np.int64)).tobytes())
    if colors is not None:
        h.update(repr(tuple(colors)).encode())
    return h.hexdigest()


# basic families -------------------------------------------------------------

def cycle(n: int, involutions: bool = False) -> Graph:
    """Cycle of length ``n``.

    By default one generator ``s`` (and its inverse ``S``) rotates the
    cycle.  With ``involutions=True`` edges alternate labels ``a`` and ``b``
    (``n`` must be even).
    """
    if n < 1:
        raise ValueError("cycle length must be positive")
    if not involutions:
        return Graph(CYCLE_GENS, [[(i + 1) % n, (i - 1) % n] for i in range(n)])
    if n % 2:
        raise ValueError("an involution-labeled cycle needs even length")
    table = []
    for i in range(n):
        a = i + 1 if i % 2 == 0 else i - 1
        b = i - 1 if i % 2 == 0 else i + 1
        table.append([a % n, b % n])
    return Graph(PATH_GENS, table)


def path(n: int) -> Graph:
    """Path on ``n`` vertices, edges labeled ``a, b, a, ...``; the missing
    label at each end is a loop."""
    if n < 1:
        raise ValueError("path needs a vertex")
    table = [[i, i] for i in range(n)]
    for i in range(n - 1):
        g = i % 2
        table[i][g] = i + 1
        table[i + 1][g] = i
    return Graph(PATH_GENS, table)


def _grid_step(c, g):
    i, j = c
    if g == 0:
        return (i + 1, j)
    if g == 1:
        return (i - 1, j)
    if g == 2:
        return (i, j + 1)
    return (i, j - 1)


def grid(w: int | None = None, h: int | None = None, color=None):
    """The square grid Z^2 with generators ``x, y``.

    Without arguments returns the infinite lazy view rooted at ``(0, 0)``.
    ``grid(w, h)`` is the ``w x h`` window (row-major, coordinates ``(i, j)``)
    whose border transitions are unknown.
    """
    view = LazyView(GRID_GENS, _grid_step, (0, 0), color=color, name="grid")
    if w is None:
        return view
    h = w if h is None else h
    if w < 1 or h < 1:
        raise ValueError("grid sides must be positive")
    return view.materialize_set([(i, j) for j in range(h) for i in range(w)])


def grid_edges(w: int, h: int):
    """Edges of the ``w x h`` grid (row-major vertex numbering) with the
    proper edge coloring ``hx%2`` / ``vy%2``."""
    edges, colors = [], []
    for j in range(h):
        for i in range(w):
            v = j * w + i
            if i + 1 < w:
                edges.append((v, v + 1))
                colors.append(f"h{i % 2}")
            if j + 1 < h:
                edges.append((v, v + w))
                colors.append(f"v{j % 2}")
    return edges, colors


def _tree_words(d: int, depth: int):
    words = [()]
    index = {(): 0}
    i = 0
    while i < len(words):
        w = words[i]
        i += 1
        if len(w) == depth:
            continue
        for g in range(d):
            if w and w[-1] == g:
                continue
            u = w + (g,)
            index[u] = len(words)
            words.append(u)
    return words, index


def _tree_table(d, words, index):
    table = []
    for w in words:
        row = []
        for g in range(d):
            if w and w[-1] == g:
                row.append(index[w[:-1]])
            else:
                row.append(index.get(w + (g,), -1))
        table.append(row)
    return table


def regular_tree(d: int, depth: int) -> Graph:
    """Window of radius ``depth`` in the ``d``-regular tree, realized as the
    Cayley graph of the free product of ``d`` copies of Z/2 (reduced words)."""
    if d < 1 or depth < 0:
        raise ValueError("need d >= 1 and depth >= 0")
    words, index = _tree_words(d, depth)
    gens = GeneratorSet.involutions(d, [chr(ord("a") + g) for g in range(d)] if d <= 26 else None)
    return Graph(gens, _tree_table(d, words, index), coords=words)


# colored graphs -> involution Schreier graphs -------------------------------

def graph_to_involution_schreier(n: int, edges: Sequence[tuple[int, int]], edge_colors: Sequence,
                                 open_vertices: Iterable[int] = (), palette: Sequence | None = None,
                                 colors=None):
    """Turn a properly edge-colored simple graph into a Schreier graph of
    involutions, one per edge color.

    Label ``g`` swaps the endpoints of the edge colored ``palette[g]`` and
    fixes vertices without such an edge.  For ``open_vertices`` (window
    frontier) a missing color means "unknown", so the entry is ``-1``.
    Returns ``(graph, palette)``.
    """
    if palette is None:
        palette = sorted(set(edge_colors), key=repr)
    palette = list(palette)
    slot = {c: g for g, c in enumerate(palette)}
    opened = set(open_vertices)
    k = len(palette)
    table = [[-1 if v in opened else v for _ in range(k)] for v in range(n)]
    seen = set()
    for (x, y), c in zip(edges, edge_colors):
        if x == y:
            raise UrsLabError(f"loop at {x} in a simple graph")
        if c not in slot:
            raise UrsLabError(f"edge color {c!r} missing from the palette")
        g = slot[c]
        for v in (x, y):
            if (v, g) in seen:
                raise UrsLabError(f"edge coloring not proper: two {c!r} edges at vertex {v}")
            seen.add((v, g))
        table[x][g] = y
        table[y][g] = x
    names = [f"i{g}" for g in range(k)]
    return Graph(GeneratorSet.involutions(k, names), table, colors=colors), palette


def product_colored_schreier(n: int, edges, edge_colors, k: int = 16, n_max: int = 4, seed: int = 0,
                             open_vertices: Iterable[int] = (), budget_ms: float | None = None):
    """Recolor edges by ``({rho(x), rho(y)}, c(e))`` with ``rho`` a
    nonrepetitive vertex coloring and return the involution Schreier graph.

    Returns ``(graph, palette, rho)``.
    """
    adj = [[] for _ in range(n)]
    for x, y in edges:
        adj[x].append(y)
        adj[y].append(x)
    adj = [sorted(set(a)) for a in adj]
    rho: Coloring = nonrepetitive_color(adj, k=k, n_max=n_max, seed=seed, budget_ms=budget_ms)
    zeta = genericity_product_coloring(edges, edge_colors, rho)
    g, palette = graph_to_involution_schreier(n, edges, zeta, open_vertices)
    return g, palette, rho


# tree with a ray ------------------------------------------------------------

@dataclass
class TreeRayEncoding:
    """3-regular tree window with a ray and an edge coloring encoding the
    map ``phi`` (one step towards the ray).

    ``phi[v]`` is ``-1`` when the step leaves the window.  ``colors`` maps a
    sorted edge pair to ``(c(a, phi a), c(phi a, phi^2 a))`` (second entry
    ``None`` when ``phi^2 a`` is outside).  ``interior`` lists vertices whose
    whole neighbourhood is colored.
    """

    graph: Graph
    ray: list
    phi: list
    base: dict
    colors: dict
    interior: list

    def decode(self, v: int) -> int:
        """Recover ``phi(v)`` from the colors of the edges at ``v``."""
        inc = []
        for t in self.graph.neighbors(v):
            col = self.colors[(min(v, t), max(v, t))]
            inc.append((t, col))
        hits = []
        for t, col in inc:
            if all(other[1] == col[0] for s, other in inc if s != t):
                hits.append(t)
        if len(hits) != 1:
            raise UrsLabError(f"{len(hits)} candidate directions at vertex {v}")
        return hits[0]


def _distance3_edge_coloring(g: Graph, edges):
    """Greedy edge coloring where edges with endpoints at distance <= 2
    (edge distance < 3) get different colors."""
    inc = [[] for _ in range(len(g))]
    for eid, (x, y) in enumerate(edges):
        inc[x].append(eid)
        inc[y].append(eid)
    adj = g.adjacency()
    col = [-1] * len(edges)
    for eid, (x, y) in enumerate(edges):
        near = {x, y}
        frontier = [x, y]
        for _ in range(2):
            nxt = []
            for u in frontier:
                for t in adj[u]:
                    if t not in near:
                        near.add(t)
                        nxt.append(t)
            frontier = nxt
        used = {col[f] for u in near for f in inc[u] if col[f] >= 0}
        c = 0
        while c in used:
            c += 1
        col[eid] = c
    return col


def tree_ray_encoding(depth: int) -> TreeRayEncoding:
    """Encode the direction towards the ray ``a b a b ...`` in a 3-regular
    tree window of the given depth."""
    if depth < 3:
        raise ValueError("depth must be at least 3")
    words, index = _tree_words(3, depth)
    g = Graph(CUBIC_GENS, _tree_table(3, words, index), coords=words)
    ray_word = tuple(i % 2 for i in range(depth))
    ray = [index[ray_word[:i]] for i in range(depth + 1)]
    phi = []
    for w in words:
        if w == ray_word[:len(w)]:
            phi.append(index[ray_word[:len(w) + 1]] if len(w) < depth else -1)
        else:
            phi.append(index[w[:-1]])
    edges = g.edges()
    base_list = _distance3_edge_coloring(g, edges)
    base = {e: c for e, c in zip(edges, base_list)}
    colors = {}
    for a in range(len(words)):
        b = phi[a]
        if b < 0:
            continue
        first = base[(min(a, b), max(a, b))]
        c = phi[b]
        second = None if c < 0 else base[(min(b, c), max(b, c))]
        colors[(min(a, b), max(a, b))] = (first, second)
    interior = [v for v, w in enumerate(words) if len(w) <= depth - 2]
    return TreeRayEncoding(g, ray, phi, base, colors, interior)


# large girth cubic graphs ---------------------------------------------------

def _incidence(n, matchings):
    nbr = [[] for _ in range(n)]
    for L, m in enumerate(matchings):
        for v in range(n):
            u = int(m[v])
            if v < u:
                eid = (L, v)
                nbr[v].append((u, eid))
                nbr[u].append((v, eid))
    return nbr


def _short_cycle(nbr, root, limit):
    """Length of the shortest cycle closed by a BFS from ``root`` within depth
    ``limit`` (an upper bound on the shortest cycle near ``root``)."""
    dist = {root: 0}
    pedge = {root: None}
    q = deque([root])
    best = None
    while q:
        x = q.popleft()
        if dist[x] >= limit:
            continue
        for y, eid in nbr[x]:
            if eid == pedge[x]:
                continue
            if y in dist:
                L = dist[x] + dist[y] + 1
                if best is None or L < best:
                    best = L
            else:
                dist[y] = dist[x] + 1
                pedge[y] = eid
                q.append(y)
    return best


def girth(n: int, edges: Sequence[tuple[int, int]]) -> float:
    """Girth of a multigraph (parallel edges give 2, loops 1); ``inf`` for forests."""
    nbr = [[] for _ in range(n)]
    for eid, (x, y) in enumerate(edges):
        if x == y:
            return 1
        nbr[x].append((y, eid))
        nbr[y].append((x, eid))
    best = float("inf")
    for r in range(n):
        L = _short_cycle(nbr, r, n)
        if L is not None and L < best:
            best = L
    return best


@dataclass
class GirthReport:
    size: int
    target: int
    girth: float
    met: bool
    rejections: int
    switches: int


def _matchings_graph(matchings):
    n = len(matchings[0])
    table = [[int(m[v]) for m in matchings] for v in range(n)]
    return Graph(CUBIC_GENS, table)


def _bad_vertices(nbr, target):
    limit = target // 2
    out = set()
    for v in range(len(nbr)):
        L = _short_cycle(nbr, v, limit)
        if L is not None and L < target:
            out.add(v)
    return out


def _girth_of(n, ms):
    return girth(n, [(v, int(m[v])) for m in ms for v in range(n) if v < m[v]])


def random_cubic(n: int, girth_target: int = 3, seed: int = 0, tries: int = 20,
                 max_switches: int = 20000):
    """Random 3-regular graph on ``n`` vertices as a union of three perfect
    matchings labeled ``a, b, c``.

    Plain rejection first; if that does not reach ``girth_target``, the best
    sample is repaired by matching switches that never increase the number
    of vertices near a short cycle.  Returns ``(graph, report)``.
    """
    if n % 2 or n < 2:
        raise ValueError("cubic graphs need an even number of vertices")
    rng = rng_stream(seed, f"random_cubic:{n}")

    def sample():
        ms = []
        for _ in range(3):
            p = rng.permutation(n)
            m = np.empty(n, dtype=np.int64)
            m[p[0::2]] = p[1::2]
            m[p[1::2]] = p[0::2]
            ms.append(m)
        return ms

    def short(ms):
        # shortest cycle below the target, or the target itself when there is none
        nbr = _incidence(n, ms)
        found = [_short_cycle(nbr, r, girth_target // 2) for r in range(n)]
        found = [L for L in found if L is not None and L < girth_target]
        return min(found) if found else girth_target

    best, best_g = None, -1
    rejections = 0
    for _ in range(tries):
        ms = sample()
        G = short(ms)
        if G > best_g:
            best, best_g = ms, G
        if G >= girth_target:
            return (_matchings_graph(ms),
                    GirthReport(n, girth_target, _girth_of(n, ms), True, rejections, 0))
        rejections += 1
    ms = [m.copy() for m in best]
    bad = _bad_vertices(_incidence(n, ms), girth_target)
    switches = 0
    steps = 0
    while bad and steps < max_switches:
        steps += 1
        u = sorted(bad)[int(rng.integers(len(bad)))]
        L = int(rng.integers(3))
        v = int(ms[L][u])
        x = int(rng.integers(n))
        y = int(ms[L][x])
        if len({u, v, x, y}) < 4:
            continue
        m = ms[L]
        old = (m[u], m[v], m[x], m[y])
        if rng.integers(2):
            m[u], m[x], m[v], m[y] = x, u, y, v
        else:
            m[u], m[y], m[v], m[x] = y, u, x, v
        nb = _bad_vertices(_incidence(n, ms), girth_target)
        if len(nb) <= len(bad):
            bad = nb
            switches += 1
        else:
            m[u], m[v], m[x], m[y] = old
    G = _girth_of(n, ms)
    return _matchings_graph(ms), GirthReport(n, girth_target, G, G >= girth_target, rejections,
                                             switches)


def large_girth_sequence(sizes: Sequence[int], girth_target: int = 3, seed: int = 0,
                         tries: int = 20):
    """Seeded random cubic graphs of the given sizes with a girth floor.

    Returns ``(graphs, reports)``; a report with ``met=False`` carries the
    best girth found.
    """
    graphs, reports = [], []
    for i, n in enumerate(sizes):
        g, rep = random_cubic(n, girth_target, seed=seed * 1_000_003 + i, tries=tries)
        graphs.append(g)
        reports.append(rep)
    return graphs, reports


# covers ---------------------------------------------------------------------

def is_covering(cover: Graph, base: Graph, proj: Sequence[int]) -> bool:
    """Label-respecting covering map check: ``proj`` commutes with every
    label, loops map to loops and non-loops to non-loops (so 1-balls map
    isomorphically), and all fibers have the same size."""
    if cover.gens != base.gens or len(proj) != len(cover):
        return False
    k = len(cover.gens)
    for v in range(len(cover)):
        pv = proj[v]
        for g in range(k):
            t = cover.table[v][g]
            bt = base.table[pv][g]
            if t < 0 or bt < 0:
                return False
            if proj[t] != bt:
                return False
            if (t == v) != (bt == pv):
                return False
    sizes = np.bincount(np.asarray(proj, dtype=np.int64), minlength=len(base))
    return bool(len(sizes) == len(base) and sizes.min() == sizes.max() and sizes.min() > 0)


@dataclass
class CoverTower:
    """Levels ``levels[0] <- levels[1] <- ...`` with ``maps[i]`` projecting
    level ``i + 1`` onto level ``i``."""

    levels: list
    maps: list
    reseeds: list = field(default_factory=list)

    def projection(self, top: int, bottom: int) -> list:
        """Composite map from level ``top`` to level ``bottom``."""
        proj = list(range(len(self.levels[top])))
        for i in range(top - 1, bottom - 1, -1):
            m = self.maps[i]
            proj = [m[x] for x in proj]
        return proj

    def check(self) -> bool:
        return all(is_covering(self.levels[i + 1], self.levels[i], self.maps[i])
                   for i in range(len(self.maps)))


def _connected_table(table) -> bool:
    n = len(table)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        v = stack.pop()
        for t in table[v]:
            if not seen[t]:
                seen[t] = True
                stack.append(int(t))
    return bool(seen.all())


def voltage_cover(base: Graph, bits: int, seed: int = 0, max_reseeds: int = 64):
    """Regular cover with deck group ``(Z/2)^bits`` from a seeded voltage
    assignment on the edges of ``base``.

    Cover vertex ``v + s * n`` sits over ``v`` in sheet ``s``; label ``g``
    sends it to sheet ``s xor eps(v, g)``.  Loops carry voltage 0 so the
    projection stays a local isomorphism.  Disconnected covers are re-seeded.
    Returns ``(cover, projection, reseeds)``.
    """
    if not base.is_total:
        raise UrsLabError("covers need a total base graph")
    n = len(base)
    k = len(base.gens)
    inv = base.gens.inverse
    sheets = 1 << bits
    T = np.asarray(base.table, dtype=np.int64)
    for attempt in range(max_reseeds + 1):
        rng = rng_stream(seed, f"voltage:{bits}:{attempt}")
        eps = np.zeros((n, k), dtype=np.int64)
        for v in range(n):
            for g in range(k):
                u = int(T[v, g])
                if u == v:
                    continue
                h = inv[g]
                # one value per undirected labeled edge
                if (v, g) < (u, h):
                    e = int(rng.integers(sheets))
                    eps[v, g] = e
                    eps[u, h] = e
        s = np.arange(sheets, dtype=np.int64)[:, None, None]
        table = (T[None, :, :] + n * (s ^ eps[None, :, :])).reshape(sheets * n, k)
        if _connected_table(table):
            proj = list(np.tile(np.arange(n), sheets).tolist())
            return Graph(base.gens, table), proj, attempt
    raise UrsLabError(f"no connected cover after {max_reseeds} re-seeds")


def voltage_z2_cover(base: Graph, seed: int = 0):
    """Connected double cover of ``base``; returns ``(cover, projection, reseeds)``."""
    return voltage_cover(base, 1, seed)


def voltage_z2_tower(base: Graph, levels: int, seed: int = 0) -> CoverTower:
    """Tower of ``levels`` graphs, each a Z/2 voltage cover of the previous."""
    if levels < 1:
        raise ValueError("a tower has at least one level")
    if not base.is_total:
        raise UrsLabError("base graph must be total")
    from .schreier import is_connected
    if not is_connected(base):
        raise UrsLabError("base graph must be connected")
    out = [base]
    maps, reseeds = [], []
    for i in range(1, levels):
        g, proj, r = voltage_cover(out[-1], 1, seed=seed * 1_000_003 + i)
        out.append(g)
        maps.append(proj)
        reseeds.append(r)
    return CoverTower(out, maps, reseeds)


def cycle_cover_tower(levels: int, base_length: int = 4) -> CoverTower:
    """Cycles of lengths ``base_length * 2^i``; each projects by ``i mod len``."""
    if levels < 1:
        raise ValueError("a tower has at least one level")
    cs = [cycle(base_length << i) for i in range(levels)]
    maps = [[v % len(cs[i]) for v in range(len(cs[i + 1]))] for i in range(levels - 1)]
    return CoverTower(cs, maps, [0] * (levels - 1))


# the recursive nonexact build -----------------------------------------------

BUILD_GENS = GeneratorSet(["a", "b", "c", "s", "S", "e"], [0, 1, 2, 4, 3, 5])
_E = 5


def _lift(table, cols) -> np.ndarray:
    """Embed a table over a sub-alphabet into the build alphabet (loops elsewhere)."""
    t = np.asarray(table, dtype=np.int64)
    n = len(t)
    out = np.repeat(np.arange(n, dtype=np.int64)[:, None], len(BUILD_GENS), axis=1)
    for j, c in enumerate(cols):
        out[:, c] = t[:, j]
    return out


def _cycle_table(length):
    return _lift([[(i + 1) % length, (i - 1) % length] for i in range(length)], [3, 4])


def _bfs_multi(table, sources) -> np.ndarray:
    n = len(table)
    dist = np.full(n, -1, dtype=np.int64)
    q = deque()
    for s in sources:
        dist[s] = 0
        q.append(int(s))
    while q:
        x = q.popleft()
        for t in table[x]:
            t = int(t)
            if dist[t] < 0:
                dist[t] = dist[x] + 1
                q.append(t)
    return dist


def _diameter(table) -> tuple[int, bool]:
    """``(value, exact)``; exact by all-sources BFS on small graphs, else the
    bound ``2 * ecc(0)``."""
    n = len(table)
    if n <= 2000:
        return int(max(_bfs_multi(table, [v]).max() for v in range(n))), True
    return 2 * int(_bfs_multi(table, [0]).max()), False


@dataclass
class NonexactBuild:
    """All levels of the recursive build.

    ``H[i]`` and ``G[i]`` are transition tables over :data:`BUILD_GENS`
    (index ``i`` from 1).  The first ``len(H[i])`` rows of ``G[i]`` are
    ``H[i]`` with bridges added on label ``e``.  ``R[i][j]`` is the marked
    set of ``H[i]`` that received copies of ``G[j]``; ``zeta[i]`` projects
    ``H[i]`` onto ``H[i - 2]``.
    """

    depth: int
    seed: int
    H: dict
    G: dict
    R: dict
    zeta: dict
    T: dict
    anchors: dict
    attachments: dict
    params: dict
    notes: list = field(default_factory=list)

    def graph(self, i: int) -> Graph:
        return Graph(BUILD_GENS, self.G[i])

    def host(self, i: int) -> Graph:
        return Graph(BUILD_GENS, self.H[i])

    def union_window(self) -> Graph:
        """The largest odd level, standing in for the union of the odd chain."""
        return self.graph(2 * self.depth + 1)

    def even_graphs(self) -> list:
        return [self.graph(2 * i) for i in range(1, self.depth + 1)]

    # invariants -------------------------------------------------------------
    def density_ok(self) -> bool:
        for i, marks in self.R.items():
            h = len(self.H[i])
            for j, r in marks.items():
                if len(r) * len(self.G[j]) * 10 ** j > h:
                    return False
        return True

    def covering_ok(self) -> bool:
        for i, marks in self.R.items():
            for j, r in marks.items():
                d = _bfs_multi(self.H[i], r)
                if d.min() < 0 or d.max() > self.T[j]:
                    return False
        return True

    def fibers_ok(self) -> bool:
        for i, proj in self.zeta.items():
            if not is_covering(self.host(i), self.host(i - 2), proj):
                return False
        return True

    def pullbacks_ok(self) -> bool:
        for i, proj in self.zeta.items():
            proj = np.asarray(proj)
            for j, r in self.R[i].items():
                if j not in self.R.get(i - 2, {}):
                    continue
                lower = np.asarray(self.R[i - 2][j])
                pulled = np.flatnonzero(np.isin(proj, lower))
                if not np.array_equal(np.sort(np.asarray(r)), pulled):
                    return False
                if not np.array_equal(np.unique(proj[np.asarray(r)]), np.unique(lower)):
                    return False
        return True

    def attachments_ok(self) -> bool:
        for i, marks in self.R.items():
            G, H = self.G[i], self.H[i]
            if len(G) != len(H) + sum(len(r) * len(self.G[j]) for j, r in marks.items()):
                return False
            if not np.array_equal(np.delete(G[: len(H)], _E, axis=1), np.delete(H, _E, axis=1)):
                return False
            all_r = np.concatenate([np.asarray(r) for r in marks.values()])
            if len(np.unique(all_r)) != len(all_r):
                return False
            bridged = np.flatnonzero(G[: len(H), _E] != np.arange(len(H)))
            if not np.array_equal(bridged, np.sort(all_r)):
                return False
            if not Graph(BUILD_GENS, G).is_total:
                return False
            try:
                self.graph(i).check()
            except Exception:
                return False
        return True

    def even_host_majority(self) -> bool:
        return all(2 * len(self.H[2 * i]) > len(self.G[2 * i]) for i in range(1, self.depth + 1))

    def top_copy_boundary(self, i: int):
        """Boundary ratio of the copy of ``G[n]`` attached at the top mark of
        level ``i``; it has exactly one boundary vertex."""
        from fractions import Fraction
        n = max(self.R[i])
        start = self.attachments[i][n][0]
        size = len(self.G[n])
        G = self.G[i]
        block = G[start:start + size]
        outside = (block < start) | (block >= start + size)
        return Fraction(int(outside.any(axis=1).sum()), size)

    def check(self) -> dict:
        return {
            "density": self.density_ok(),
            "covering": self.covering_ok(),
            "fibers": self.fibers_ok(),
            "pullbacks": self.pullbacks_ok(),
            "attachments": self.attachments_ok(),
            "even_host_majority": self.even_host_majority(),
        }

    def manifest(self) -> str:
        lines = [f"nonexact depth={self.depth} seed={self.seed} "
                 + " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))]
        lines.append(f"gens {BUILD_GENS.digest()} {','.join(BUILD_GENS.names)}")
        for i in sorted(self.H):
            kind = "cycle" if i % 2 else "cubic"
            lines.append(f"H{i} kind={kind} vertices={len(self.H[i])} digest={table_digest(self.H[i])}")
        for i in sorted(self.G):
            lines.append(f"G{i} vertices={len(self.G[i])} anchor={self.anchors[i]} "
                         f"digest={table_digest(self.G[i])}")
        for i in sorted(self.zeta):
            lines.append(f"zeta{i} H{i}->H{i - 2} digest={table_digest(self.zeta[i])}")
        for j in sorted(self.T):
            lines.append(f"T{j}={self.T[j]}")
        for i in sorted(self.R):
            for j in sorted(self.R[i]):
                r = np.sort(np.asarray(self.R[i][j]))
                lines.append(f"R i={i} j={j} size={len(r)} digest={table_digest(r)}")
        for note in self.notes:
            lines.append(f"note {note}")
        return "\n".join(lines) + "\n"


def _attach(host: np.ndarray, marks: dict, G: dict, anchors: dict):
    """Host plus one copy of ``G[j]`` bridged (label ``e``) to every vertex of
    ``marks[j]``.  Returns the table and ``{j: [copy offsets]}``."""
    blocks = [host.copy()]
    offset = len(host)
    records = {}
    for j in sorted(marks):
        sub = G[j]
        recs = []
        for r in marks[j]:
            blk = sub + offset
            a = offset + anchors[j]
            blocks.append(blk)
            recs.append(offset)
            blocks[0][int(r), _E] = a
            blk[anchors[j], _E] = int(r)
            offset += len(sub)
        records[j] = recs
    return np.concatenate(blocks, axis=0), records


def _anchor(G: np.ndarray, host_size: int) -> int:
    free = np.flatnonzero(G[:host_size, _E] == np.arange(host_size))
    if len(free) == 0:
        raise UrsLabError("no unbridged host vertex to anchor on")
    return int(free[0])


def build_nonexact(depth: int, seed: int = 0, base_size: int | None = None,
                   girth_target: int = 5, cover_bits: Sequence[int] | None = None,
                   cycle_exps: Sequence[int] | None = None) -> NonexactBuild:
    """Run the recursion for ``depth`` steps, producing ``G_1 .. G_{2 depth + 1}``.

    Step 1 seeds ``G_1`` (cycle of length 4) and ``H_1`` (cycle of length 8);
    step ``n`` picks a cubic host ``H_{2n}`` (a ``(Z/2)^m`` voltage cover of
    ``H_{2n-2}``, or a random cubic graph when ``n = 1``) and a cycle host
    ``H_{2n+1}`` large enough for ``|G_n| <= 10^-n |H|``, pulls the marks
    back, and attaches copies.  ``cover_bits[n-2]`` and ``cycle_exps[n-1]``
    override the automatic sizes; an under-sized override raises.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    params = {"base_size": base_size if base_size is not None else "auto",
              "girth_target": girth_target}
    H, G, R, zeta, T, anchors, att = {}, {}, {}, {}, {}, {}, {}
    notes = []
    H[1] = _cycle_table(8)
    G[1] = _cycle_table(4)
    anchors[1] = 0
    cycle_exp = {1: 2}
    for n in range(1, depth + 1):
        need = 10 ** n * len(G[n])
        # even host
        if n == 1:
            size = max(need, base_size or 0)
            size += size % 2
            base, rep = random_cubic(size, girth_target, seed=seed)
            notes.append(f"H2 girth={rep.girth} target={rep.target} met={rep.met} "
                         f"rejections={rep.rejections} switches={rep.switches}")
            H[2] = _lift(base.table, [0, 1, 2])
        else:
            prev = H[2 * n - 2]
            m = 0
            while len(prev) << m < need:
                m += 1
            m = max(m, 1)
            if cover_bits is not None and n - 2 < len(cover_bits):
                if len(prev) << cover_bits[n - 2] < need:
                    raise UrsLabError(
                        f"cover_bits={cover_bits[n - 2]} gives |H{2 * n}|={len(prev) << cover_bits[n - 2]}"
                        f" but the size rule needs >= {need} (bits >= {m})")
                m = cover_bits[n - 2]
            base = Graph(CUBIC_GENS, prev[:, :3])
            cov, proj, reseeds = voltage_cover(base, m, seed=seed * 1_000_003 + n)
            notes.append(f"H{2 * n} cover_bits={m} reseeds={reseeds}")
            H[2 * n] = _lift(cov.table, [0, 1, 2])
            zeta[2 * n] = proj
        # odd host
        e = cycle_exp[2 * n - 1] + 1
        while (1 << (e + 1)) < need:
            e += 1
        if cycle_exps is not None and n - 1 < len(cycle_exps):
            want = cycle_exps[n - 1]
            if (1 << (want + 1)) < need or want <= cycle_exp[2 * n - 1]:
                raise UrsLabError(f"cycle exponent {want} too small for H{2 * n + 1}: "
                                  f"needs length >= {need} (exponent >= {e})")
            e = want
        cycle_exp[2 * n + 1] = e
        length = 1 << (e + 1)
        H[2 * n + 1] = _cycle_table(length)
        if n >= 2:
            zeta[2 * n + 1] = [v % len(H[2 * n - 1]) for v in range(length)]
        # radius
        d_even, exact = _diameter(H[2 * n])
        d_odd = length // 2
        if not exact and d_even > d_odd:
            d_even, exact = _diameter_exact_slow(H[2 * n]), True
        T[n] = max(d_even, d_odd)
        if n > 1 and T[n] <= T[n - 1]:
            raise UrsLabError("radii T_n must increase")
        notes.append(f"T{n} from diam(H{2 * n}){'=' if exact else '<='}{d_even} "
                     f"diam(H{2 * n + 1})={d_odd}")
        # marks and attachments
        for i in (2 * n, 2 * n + 1):
            marks = {}
            if n >= 2:
                proj = np.asarray(zeta[i])
                for j, lower in R[i - 2].items():
                    marks[j] = np.flatnonzero(np.isin(proj, np.asarray(lower)))
            taken = np.zeros(len(H[i]), dtype=bool)
            for r in marks.values():
                taken[r] = True
            free = np.flatnonzero(~taken)
            if len(free) == 0:
                raise UrsLabError(f"no unmarked vertex left in H{i}")
            marks[n] = np.array([int(free[0])])
            R[i] = marks
            G[i], att[i] = _attach(H[i], marks, G, anchors)
            anchors[i] = _anchor(G[i], len(H[i]))
    return NonexactBuild(depth, seed, H, G, R, zeta, T, anchors, att, params, notes)


def _diameter_exact_slow(table) -> int:
    return int(max(_bfs_multi(table, [v]).max() for v in range(len(table))))
