"""Følner sets, sofic completions, Benjamini-Schramm statistics,
hyperfinite decompositions, doubling maps and Property A vectors."""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ._util import FrontierError, UrsLabError, as_budget, rng_stream
from .coloring import DoublingMaps
from .schreier import Graph, LazyView, ball_code, distances, extract_ball

__all__ = [
    "FolnerReport",
    "BSHistogram",
    "CodeSet",
    "Decomposition",
    "HallViolator",
    "PropertyAWitness",
    "boundary_ratio",
    "folner_search",
    "complete_to_schreier",
    "reference_codes",
    "z_vertex_fraction",
    "collar_fraction",
    "bs_histogram",
    "bs_distance",
    "hyperfinite_decompose",
    "doubling_maps",
    "verify_doubling",
    "verify_violator",
    "property_a_ball_witness",
    "property_a_ray_witness",
    "witness_defect",
]


# --------------------------------------------------------------------------
# Følner sets

@dataclass
class FolnerReport:
    F: tuple
    boundary: tuple
    per_generator: dict
    ratio: Fraction
    success: bool = True
    tried: int = 0


def boundary_ratio(view, F: Iterable) -> FolnerReport:
    """``|dF| / |F|`` where ``dF`` are the vertices of ``F`` with an edge
    (along any label) leaving ``F``; per-label counts are reported too."""
    F = tuple(F)
    fset = set(F)
    if not F:
        raise ValueError("F must be non-empty")
    gens = view.gens
    per = Counter()
    bnd = []
    for x in F:
        out = False
        for g in range(len(gens)):
            y = view.neighbor(x, g)
            if y not in fset:
                per[gens.names[g]] += 1
                out = True
        if out:
            bnd.append(x)
    ratios = {name: Fraction(per[name], len(F)) for name in gens.names}
    return FolnerReport(F, tuple(bnd), ratios, Fraction(len(bnd), len(F)))


def _ball(view, root, r):
    if isinstance(view, LazyView):
        return view.ball_coords(root, r)
    return list(distances(view, root, max_r=r))


def folner_search(view, root, eps: float, strategy: str = "balls", max_radius: int = 64,
                  max_size: int = 100_000, budget_ms: float | None = None) -> FolnerReport:
    """Look for a set with boundary ratio ``<= eps`` around ``root``.

    ``balls`` tries ``B_0, B_1, ...``; ``greedy-grow`` adds, one at a time,
    the outside neighbour with the most edges into the current set.  On
    failure the best attempt is returned with ``success=False``.
    """
    budget = as_budget(budget_ms)
    best = None
    if strategy == "balls":
        prev = -1
        for r in range(max_radius + 1):
            F = _ball(view, root, r)
            rep = boundary_ratio(view, F)
            rep.tried = r + 1
            if best is None or rep.ratio < best.ratio:
                best = rep
            if rep.ratio <= eps:
                return rep
            if len(F) == prev or len(F) > max_size or budget.expired():
                break
            prev = len(F)
    elif strategy == "greedy-grow":
        F = [root]
        fset = {root}
        tried = 0
        while len(F) <= max_size and not budget.expired():
            rep = boundary_ratio(view, F)
            tried += 1
            rep.tried = tried
            if best is None or rep.ratio < best.ratio:
                best = rep
            if rep.ratio <= eps:
                return rep
            score = Counter()
            first_seen = {}
            for x in F:
                for g in range(len(view.gens)):
                    y = view.neighbor(x, g)
                    if y not in fset:
                        score[y] += 1
                        first_seen.setdefault(y, len(first_seen))
            if not score:
                break
            y = max(score, key=lambda z: (score[z], -first_seen[z]))
            F.append(y)
            fset.add(y)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    best.success = False
    return best


# --------------------------------------------------------------------------
# sofic completion

def complete_to_schreier(view, F: Iterable, seed: int = 0, return_report: bool = False):
    """Close the induced partial action on ``F`` into a finite Schreier graph.

    Transitions inside ``F`` are kept.  For each label pair, sources whose
    image left ``F`` are matched with targets that lost their preimage by a
    seeded uniform random bijection; an involution label pairs its deficient
    vertices at random, leaving one fixed point when their number is odd.
    """
    F = list(F)
    pos = {x: i for i, x in enumerate(F)}
    gens = view.gens
    k = len(gens)
    n = len(F)
    table = [[-1] * k for _ in range(n)]
    for i, x in enumerate(F):
        for g in range(k):
            try:
                y = view.neighbor(x, g)
            except FrontierError:
                continue
            j = pos.get(y)
            if j is not None:
                table[i][g] = j
    rng = rng_stream(seed, "complete_to_schreier")
    report = {"added": {}, "fixed_points": []}
    done = set()
    for g in range(k):
        h = gens.inverse[g]
        if g in done:
            continue
        done.update((g, h))
        if g == h:
            free = [i for i in range(n) if table[i][g] < 0]
            perm = [free[t] for t in rng.permutation(len(free))]
            if len(perm) % 2:
                z = perm.pop()
                table[z][g] = z
                report["fixed_points"].append((gens.names[g], z))
            for a, b in zip(perm[::2], perm[1::2]):
                table[a][g] = b
                table[b][g] = a
            report["added"][gens.names[g]] = len(free)
        else:
            src = [i for i in range(n) if table[i][g] < 0]
            has_pre = {table[i][g] for i in range(n) if table[i][g] >= 0}
            tgt = [j for j in range(n) if j not in has_pre]
            if len(src) != len(tgt):
                raise UrsLabError("partial action is not injective")
            tgt = [tgt[t] for t in rng.permutation(len(tgt))]
            for a, b in zip(src, tgt):
                table[a][g] = b
                table[b][h] = a
            report["added"][gens.names[g]] = len(src)
    colors = None
    if getattr(view, "colors", None) is not None or getattr(view, "color_fn", None) is not None:
        colors = [view.color(x) for x in F]
    if isinstance(view, LazyView):
        ids = [view.vertex_id(x) for x in F]
        coords = F
    else:
        ids = [view.ids[x] for x in F]
        coords = None if view.coords is None else [view.coords[x] for x in F]
    out = Graph(gens, table, colors=colors, ids=ids, coords=coords)
    out.check()
    return (out, report) if return_report else out


# --------------------------------------------------------------------------
# Benjamini-Schramm statistics

@dataclass(frozen=True)
class CodeSet:
    radius: int
    codes: frozenset
    gens_digest: str


def reference_codes(view, vertices: Iterable, r: int, exact: bool = False) -> CodeSet:
    codes = set()
    for v in vertices:
        codes.add(ball_code(extract_ball(view, v, r), exact=exact))
    return CodeSet(r, frozenset(codes), view.gens.digest())


def z_vertex_fraction(view, reference: CodeSet, r: int, vertices: Iterable | None = None,
                      exact: bool = False) -> Fraction:
    """Fraction of vertices whose ``r``-ball code lies in ``reference``."""
    if reference.radius != r:
        raise UrsLabError(f"reference codes have radius {reference.radius}, asked for {r}")
    if reference.gens_digest != view.gens.digest():
        raise UrsLabError("reference codes use a different generator set")
    vs = list(range(len(view)) if vertices is None else vertices)
    hit = 0
    for v in vs:
        try:
            if ball_code(extract_ball(view, v, r), exact=exact) in reference.codes:
                hit += 1
        except FrontierError:
            pass
    return Fraction(hit, len(vs))


def collar_fraction(view, F: Iterable, r: int) -> Fraction:
    """Fraction of ``F`` within distance ``r - 1`` of its boundary.

    Outside this collar the ``r``-balls of a completion of ``F`` coincide with
    those of ``view``, so it bounds the total variation between the two
    histograms.
    """
    F = list(F)
    if r <= 0:
        return Fraction(0)
    rep = boundary_ratio(view, F)
    fset = set(F)
    dist = {b: 0 for b in rep.boundary}
    q = deque(rep.boundary)
    while q:
        x = q.popleft()
        if dist[x] >= r - 1:
            continue
        for g in range(len(view.gens)):
            y = view.neighbor(x, g)
            if y in fset and y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return Fraction(len(dist), len(F))


@dataclass
class BSHistogram:
    """Empirical distribution of ``r``-ball codes."""

    radius: int
    counts: Counter
    total: int
    gens_digest: str = ""

    def freq(self, code) -> Fraction:
        return Fraction(self.counts.get(code, 0), self.total)

    def frequencies(self) -> dict:
        return {c: Fraction(m, self.total) for c, m in self.counts.items()}

    def to_text(self) -> str:
        lines = []
        for c in sorted(self.counts):
            lines.append(f"bs r={self.radius} {c.hex()} {self.counts[c]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, gens_digest: str = "") -> "BSHistogram":
        counts = Counter()
        radius = None
        for ln, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4 or parts[0] != "bs" or not parts[1].startswith("r="):
                raise UrsLabError(f"line {ln}: expected 'bs r=<r> <code-hex> <count>'")
            r = int(parts[1][2:])
            if radius is not None and r != radius:
                raise UrsLabError(f"line {ln}: mixed radii")
            radius = r
            counts[bytes.fromhex(parts[2])] += int(parts[3])
        return cls(radius if radius is not None else 0, counts, sum(counts.values()), gens_digest)


def bs_histogram(view, r: int, vertices: Iterable | None = None, exact: bool = False) -> BSHistogram:
    vs = list(range(len(view)) if vertices is None else vertices)
    counts = Counter(ball_code(extract_ball(view, v, r), exact=exact) for v in vs)
    return BSHistogram(r, counts, len(vs), view.gens.digest())


def bs_distance(h1: BSHistogram, h2: BSHistogram) -> Fraction:
    """Total variation distance between two histograms at the same radius."""
    if h1.radius != h2.radius:
        raise UrsLabError(f"radius mismatch: {h1.radius} vs {h2.radius}")
    if h1.gens_digest and h2.gens_digest and h1.gens_digest != h2.gens_digest:
        raise UrsLabError("histograms use different generator sets")
    keys = set(h1.counts) | set(h2.counts)
    s = sum((abs(h1.freq(c) - h2.freq(c)) for c in keys), Fraction(0))
    return s / 2


# --------------------------------------------------------------------------
# hyperfinite decompositions

@dataclass
class Decomposition:
    removed: list
    K: int
    component_sizes: list
    n: int
    mode: str = "heuristic"

    @property
    def removed_fraction(self) -> Fraction:
        return Fraction(len(self.removed), self.n) if self.n else Fraction(0)

    def to_text(self) -> str:
        census = Counter(self.component_sizes)
        lines = [f"decomposition K={self.K} n={self.n} removed={len(self.removed)} mode={self.mode}"]
        lines += [f"cut {u} {v}" for u, v in self.removed]
        lines += [f"components size={s} count={census[s]}" for s in sorted(census)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Decomposition":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("decomposition "):
            raise UrsLabError("line 1: expected a 'decomposition' header")
        try:
            f = dict(p.split("=", 1) for p in lines[0].split()[1:])
            removed, sizes = [], []
            for ln, line in enumerate(lines[1:], 2):
                parts = line.split()
                if parts[0] == "cut" and len(parts) == 3:
                    removed.append((int(parts[1]), int(parts[2])))
                elif parts[0] == "components" and len(parts) == 3:
                    c = dict(p.split("=", 1) for p in parts[1:])
                    sizes += [int(c["size"])] * int(c["count"])
                else:
                    raise UrsLabError(f"line {ln}: unexpected record {parts[0]!r}")
            if len(removed) != int(f["removed"]):
                raise UrsLabError("line 1: removed count disagrees with the cut lines")
            return cls(removed, int(f["K"]), sorted(sizes, reverse=True), int(f["n"]), f["mode"])
        except (KeyError, ValueError) as exc:
            raise UrsLabError(f"bad decomposition record ({exc})") from None


def _simple_edges(view):
    if isinstance(view, Graph):
        return view.edges()
    return sorted({(min(u, v), max(u, v)) for u, v in view if u != v})


def _components_after(n, edges, removed):
    rem = set(removed)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in edges:
        if e not in rem:
            a, b = find(e[0]), find(e[1])
            if a != b:
                parent[a] = b
    sizes = Counter(find(v) for v in range(n))
    return sorted(sizes.values(), reverse=True)


def _heuristic_blocks(adj, K, rng):
    n = len(adj)
    block = [-1] * n
    size = []
    start = int(rng.integers(n))
    order = []
    seen = [False] * n
    for s in [start] + list(range(n)):
        if seen[s]:
            continue
        seen[s] = True
        q = deque([s])
        while q:
            x = q.popleft()
            order.append(x)
            nb = list(adj[x])
            rng.shuffle(nb)
            for y in nb:
                if not seen[y]:
                    seen[y] = True
                    q.append(y)
    for v in order:
        if block[v] >= 0:
            continue
        b = len(size)
        size.append(0)
        q = deque([v])
        block[v] = b
        size[b] = 1
        while q and size[b] < K:
            x = q.popleft()
            for y in adj[x]:
                if block[y] < 0 and size[b] < K:
                    block[y] = b
                    size[b] += 1
                    q.append(y)
    # local moves: relocate single vertices and merge blocks while the cut shrinks
    improved = True
    while improved:
        improved = False
        for v in range(n):
            a = block[v]
            cnt = Counter(block[y] for y in adj[v])
            best_b, best_gain = None, 0
            for b, c in cnt.items():
                if b != a and size[b] < K:
                    gain = c - cnt.get(a, 0)
                    if gain > best_gain:
                        best_b, best_gain = b, gain
            if best_b is not None:
                block[v] = best_b
                size[a] -= 1
                size[best_b] += 1
                improved = True
        between = Counter()
        for x in range(n):
            for y in adj[x]:
                if x < y and block[x] != block[y]:
                    between[(min(block[x], block[y]), max(block[x], block[y]))] += 1
        for (a, b), c in sorted(between.items(), key=lambda t: -t[1]):
            if size[a] and size[b] and size[a] + size[b] <= K:
                for x in range(n):
                    if block[x] == b:
                        block[x] = a
                size[a] += size[b]
                size[b] = 0
                improved = True
                break
    return block


def _cut(edges, block):
    return [(u, v) for u, v in edges if block[u] != block[v]]


def _exact_blocks(adj, edges, K, upper):
    """Minimum cut over assignments into blocks of size <= K (branch and bound)."""
    n = len(adj)
    order = sorted(range(n), key=lambda v: -len(adj[v]))
    pos = {v: i for i, v in enumerate(order)}
    earlier = [[u for u in adj[v] if pos[u] < pos[v]] for v in order]
    block = [-1] * n
    size = []
    best = [upper[0], list(upper[1])]

    def rec(i, cut):
        if cut >= best[0]:
            return
        if i == n:
            best[0] = cut
            best[1] = list(block)
            return
        v = order[i]
        opts = []
        for b in range(len(size)):
            if size[b] < K:
                extra = sum(1 for u in earlier[i] if block[u] != b)
                opts.append((extra, b))
        opts.append((len(earlier[i]), len(size)))
        opts.sort()
        for extra, b in opts:
            if b == len(size):
                size.append(0)
            block[v] = b
            size[b] += 1
            rec(i + 1, cut + extra)
            size[b] -= 1
            block[v] = -1
            if b == len(size) - 1 and size[b] == 0:
                size.pop()

    rec(0, 0)
    return best[1]


def hyperfinite_decompose(view, K: int, mode: str = "heuristic", seed: int = 0,
                          restarts: int = 8) -> Decomposition:
    """Remove edges so that every remaining component has at most ``K`` vertices.

    ``heuristic`` grows BFS blocks of size ``K`` (several seeded restarts) and
    then moves boundary vertices and merges blocks while the cut shrinks.
    ``exact`` returns a minimum cut by branch and bound (at most 12 vertices).
    """
    if K < 1:
        raise ValueError("K must be positive")
    edges = _simple_edges(view)
    n = len(view)
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    if K >= n:
        return Decomposition([], K, _components_after(n, edges, []), n, mode)
    rng = rng_stream(seed, "hyperfinite")
    best = None
    for _ in range(max(1, restarts)):
        block = _heuristic_blocks(adj, K, rng)
        cut = _cut(edges, block)
        if best is None or len(cut) < len(best[0]):
            best = (cut, block)
    if mode == "exact":
        if n > 12:
            raise UrsLabError("exact mode is limited to 12 vertices")
        block = _exact_blocks(adj, edges, K, (len(best[0]), best[1]))
        best = (_cut(edges, block), block)
    elif mode != "heuristic":
        raise ValueError(f"unknown mode {mode!r}")
    removed = best[0]
    sizes = _components_after(n, edges, removed)
    if sizes and sizes[0] > K:
        raise UrsLabError("internal error: decomposition leaves a large component")
    return Decomposition(removed, K, sizes, n, mode)


# --------------------------------------------------------------------------
# doubling maps

@dataclass
class HallViolator:
    A: tuple
    neighborhood: tuple
    C: int


def _interior(view: Graph, margin: int):
    front = view.frontier()
    if not front:
        return list(range(len(view)))
    if margin <= 0:
        return list(range(len(view)))
    near = distances(view, front, max_r=margin - 1)
    return [v for v in range(len(view)) if v not in near]


def doubling_maps(view: Graph, C: int, margin: int | None = None, interior: Iterable | None = None):
    """Two injections of the interior with disjoint images, moving points at
    most ``C``; or a Hall violator ``A`` with ``|B_C(A)| < 2|A|``.

    Solved as a bipartite matching between two copies of the interior and
    all vertices, joining ``(x, i)`` to ``y`` when ``d(x, y) <= C``.
    """
    margin = C if margin is None else margin
    I = sorted(_interior(view, margin) if interior is None else interior)
    n = len(view)
    balls = {x: sorted(distances(view, x, max_r=C)) for x in I}
    rows, cols = [], []
    for i, x in enumerate(I):
        for y in balls[x]:
            rows += [2 * i, 2 * i + 1]
            cols += [y, y]
    m = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(2 * len(I), n))
    match = maximum_bipartite_matching(m, perm_type="column")
    if np.all(match >= 0):
        phi1 = {x: int(match[2 * i]) for i, x in enumerate(I)}
        phi2 = {x: int(match[2 * i + 1]) for i, x in enumerate(I)}
        return DoublingMaps(phi1, phi2, C, tuple(I))
    # alternating BFS from an unmatched left node (König)
    owner = {}
    for left, y in enumerate(match):
        if y >= 0:
            owner[int(y)] = left
    start = int(np.flatnonzero(match < 0)[0])
    seen_left = {start}
    seen_right = set()
    q = deque([start])
    while q:
        left = q.popleft()
        for y in balls[I[left // 2]]:
            if y in seen_right:
                continue
            seen_right.add(y)
            nxt = owner.get(y)
            if nxt is not None and nxt not in seen_left:
                seen_left.add(nxt)
                q.append(nxt)
    A = sorted({I[left // 2] for left in seen_left})
    nb = sorted(set().union(*(balls[x] for x in A)))
    v = HallViolator(tuple(A), tuple(nb), C)
    if not verify_violator(view, v):
        raise UrsLabError("internal error: Hall violator does not verify")
    return v


def verify_doubling(view: Graph, dm: DoublingMaps) -> bool:
    """Injectivity, disjoint images and displacement ``<= C``, checked directly."""
    im1 = list(dm.phi1.values())
    im2 = list(dm.phi2.values())
    if len(set(im1)) != len(im1) or len(set(im2)) != len(im2):
        return False
    if set(im1) & set(im2):
        return False
    for phi in (dm.phi1, dm.phi2):
        for x, y in phi.items():
            d = distances(view, x, max_r=dm.C).get(y)
            if d is None or d > dm.C:
                return False
    return True


def verify_violator(view: Graph, v: HallViolator) -> bool:
    ball = distances(view, list(v.A), max_r=v.C)
    return len(ball) < 2 * len(v.A)


# --------------------------------------------------------------------------
# Property A

@dataclass
class PropertyAWitness:
    """Unit vectors ``vectors[x] = {y: value}`` with support radius and
    locality radius."""

    n: int
    vectors: dict
    support_radius: int
    locality_radius: int
    defect: float = 0.0
    bound: float | None = None
    report: dict = field(default_factory=dict)

    def norm(self, x) -> float:
        return math.sqrt(sum(v * v for v in self.vectors[x].values()))


def witness_defect(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return float(sum((a.get(k, 0.0) - b.get(k, 0.0)) ** 2 for k in keys))


def property_a_ball_witness(view: Graph, window: Iterable | None = None, k: int = 1,
                            d: int | None = None) -> PropertyAWitness:
    """Ball-uniform vectors ``1/sqrt|B_k(x)|`` on ``B_k(x)``.

    For every adjacent pair of window vertices the defect
    ``||v_x - v_y||^2`` is compared with ``2 d rho + (1/sqrt(2 rho d + 1) - 1)^2``
    where ``rho = |dB_k(x)| / |B_k(x)|`` for the endpoint with the smaller
    ball.  Window vertices need their ``(k+1)``-ball materialized.
    """
    win = list(range(len(view)) if window is None else window)
    if d is None:
        d = view.max_degree()
    balls = {}
    rho = {}
    for x in win:
        dist = distances(view, x, max_r=k + 1)
        for v in dist:
            if dist[v] <= k and not view.is_complete(v):
                raise FrontierError(f"ball of radius {k + 1} at {x} is truncated")
        B = [v for v, t in dist.items() if t <= k]
        sphere = sum(1 for v, t in dist.items() if t == k and any(
            dist.get(u, k + 2) > k for u in view.neighbors(v)))
        balls[x] = B
        rho[x] = sphere / len(B)
    vectors = {x: {v: 1.0 / math.sqrt(len(B)) for v in B} for x, B in balls.items()}
    worst = 0.0
    worst_slack = math.inf
    violations = []
    for x in win:
        for y in view.neighbors(x):
            if y not in balls or y < x:
                continue
            dfx = witness_defect(vectors[x], vectors[y])
            if len(balls[x]) < len(balls[y]):
                cands = [rho[x]]
            elif len(balls[y]) < len(balls[x]):
                cands = [rho[y]]
            else:
                cands = [rho[x], rho[y]]
            bound = min(2 * d * r + (1 / math.sqrt(2 * r * d + 1) - 1) ** 2 for r in cands)
            worst = max(worst, dfx)
            worst_slack = min(worst_slack, bound - dfx)
            if dfx > bound + 1e-12:
                violations.append((x, y, dfx, bound))
    w = PropertyAWitness(k, vectors, k, k, worst)
    w.report = {"max_defect2": worst, "min_slack": worst_slack, "violations": violations,
                "max_rho": max(rho.values()) if rho else 0.0, "d": d}
    w.bound = None if not rho else max(
        2 * d * r + (1 / math.sqrt(2 * r * d + 1) - 1) ** 2 for r in rho.values())
    return w


def property_a_ray_witness(phi, n: int, vertices: Iterable) -> PropertyAWitness:
    """Path-uniform vectors ``1/n`` on ``s, phi(s), ..., phi^(n^2-1)(s)``.

    ``phi`` is a mapping (or callable) giving the neighbour towards the ray;
    it must be defined along every path.
    """
    get = phi if callable(phi) else phi.get
    L = n * n
    vectors = {}
    for s in vertices:
        path = [s]
        while len(path) < L:
            nxt = get(path[-1])
            if nxt is None:
                raise FrontierError(f"ray path from {s} leaves the window")
            path.append(nxt)
        vectors[s] = {v: 1.0 / n for v in path}
    return PropertyAWitness(n, vectors, L - 1, L - 1)
