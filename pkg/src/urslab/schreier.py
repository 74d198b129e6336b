"""Generator-labeled graphs, rooted balls and their canonical codes.

A Schreier graph is stored as a transition table ``table[v][g]``: the vertex
reached from ``v`` along generator label ``g``.  Every label has a formal
inverse (possibly itself), so the table is a partial permutation per label.
The value ``-1`` marks a transition that has not been materialized; it only
appears at the frontier of finite windows cut out of larger graphs.

Balls follow the walk convention: ``B_r(v)`` holds the vertices reachable by
walks of length at most ``r`` together with every transition taken by such
a walk, i.e. the full rows of the vertices at distance ``< r``.  Rows of the
outer shell (distance exactly ``r``) are not part of the ball.
"""
from __future__ import annotations

import hashlib
from array import array
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

from ._util import FrontierError, UrsLabError

__all__ = [
    "GeneratorSet",
    "Graph",
    "LazyView",
    "RootedBall",
    "extract_ball",
    "ball_code",
    "schreier_distance",
    "root_change",
    "automorphism_transport",
    "distances",
    "FrontierError",
]


class GeneratorSet:
    """Ordered generator labels with their formal inverses.

    ``names[g]`` is the label of generator ``g`` and ``inverse[g]`` the index
    of its inverse label.  The order is fixed at construction and is part of
    every ball code.
    """

    def __init__(self, names: Sequence[str], inverse: Sequence[int]):
        names = tuple(str(s) for s in names)
        inverse = tuple(int(i) for i in inverse)
        if len(names) != len(inverse):
            raise ValueError("names and inverse must have the same length")
        if len(set(names)) != len(names):
            raise ValueError("generator names must be distinct")
        for g, h in enumerate(inverse):
            if not 0 <= h < len(names) or inverse[h] != g:
                raise ValueError("inverse pairing must be an involution on labels")
        for s in names:
            if not s or any(ch in s for ch in " \t\n:,"):
                raise ValueError(f"bad generator name {s!r}")
        self.names = names
        self.inverse = inverse
        self._index = {s: i for i, s in enumerate(names)}

    @classmethod
    def free(cls, n: int) -> "GeneratorSet":
        """``n`` generators paired with distinct inverses: a, A, b, B, ..."""
        names = []
        for i in range(n):
            if n <= 26:
                lo = chr(ord("a") + i)
                names += [lo, lo.upper()]
            else:
                names += [f"g{i}", f"G{i}"]
        inverse = []
        for i in range(n):
            inverse += [2 * i + 1, 2 * i]
        return cls(names, inverse)

    @classmethod
    def involutions(cls, k: int, names: Sequence[str] | None = None) -> "GeneratorSet":
        if names is None:
            names = [f"i{j}" for j in range(k)]
        return cls(names, range(k))

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return (isinstance(other, GeneratorSet) and self.names == other.names
                and self.inverse == other.inverse)

    def __hash__(self) -> int:
        return hash((self.names, self.inverse))

    def __repr__(self) -> str:
        return f"GeneratorSet({list(self.names)!r}, {list(self.inverse)!r})"

    def inv(self, g: int) -> int:
        return self.inverse[g]

    def is_involution(self, g: int) -> bool:
        return self.inverse[g] == g

    def index(self, name) -> int:
        if isinstance(name, int):
            if not 0 <= name < len(self):
                raise IndexError(name)
            return name
        return self._index[name]

    def word(self, w) -> tuple[int, ...]:
        """Parse a word given as label indices, label names, or a string of
        single-character names."""
        if isinstance(w, str):
            if all(len(s) == 1 for s in self.names):
                return tuple(self._index[ch] for ch in w)
            return tuple(self._index[s] for s in w.split())
        return tuple(self.index(x) for x in w)

    def inverse_word(self, w) -> tuple[int, ...]:
        w = self.word(w)
        return tuple(self.inverse[g] for g in reversed(w))

    def digest(self) -> str:
        text = ",".join(self.names) + "|" + ",".join(map(str, self.inverse))
        return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


class Graph:
    """Finite (window of a) Schreier graph with an explicit transition table.

    Parameters
    ----------
    gens : GeneratorSet
    table : sequence of rows
        ``table[v][g]`` is the target of ``v`` under label ``g`` or ``-1``
        when unknown (window frontier).
    colors : sequence, optional
        Vertex colors (hashable symbols); part of every ball code.
    ids : sequence of int, optional
        Opaque 64-bit vertex ids used in files; defaults to ``range(n)``.
    coords : sequence, optional
        Canonical coordinates of the vertices when cut from a lazy view.
    """

    def __init__(self, gens: GeneratorSet, table, colors=None, ids=None, coords=None):
        self.gens = gens
        k = len(gens)
        rows = [tuple(int(t) for t in row) for row in table]
        n = len(rows)
        for v, row in enumerate(rows):
            if len(row) != k:
                raise ValueError(f"row {v} has {len(row)} entries, expected {k}")
            for t in row:
                if t < -1 or t >= n:
                    raise ValueError(f"row {v} points outside the graph: {t}")
        self.table = rows
        self.colors = None if colors is None else tuple(colors)
        if self.colors is not None and len(self.colors) != n:
            raise ValueError("one color per vertex required")
        self.ids = tuple(range(n)) if ids is None else tuple(int(i) for i in ids)
        if len(set(self.ids)) != n:
            raise ValueError("vertex ids must be distinct")
        self.coords = None if coords is None else tuple(coords)
        self._moves = []
        for v, row in enumerate(rows):
            if -1 in row:
                self._moves.append(None)
            else:
                self._moves.append(tuple((g, t) for g, t in enumerate(row) if t != v))
        self._id_index = None
        self._coord_index = None

    def __len__(self) -> int:
        return len(self.table)

    def __repr__(self) -> str:
        c = ", colored" if self.colors is not None else ""
        return f"<Graph n={len(self)} gens={len(self.gens)}{c}>"

    @property
    def n(self) -> int:
        return len(self.table)

    def vertices(self) -> range:
        return range(len(self.table))

    def neighbor(self, v: int, g: int) -> int:
        t = self.table[v][g]
        if t < 0:
            raise FrontierError(f"transition {self.gens.names[g]} at vertex {v} not materialized")
        return t

    def moves(self, v: int):
        """Non-loop transitions ``(label, target)`` of ``v`` in label order."""
        m = self._moves[v]
        if m is None:
            raise FrontierError(f"vertex {v} lies on the window frontier")
        return m

    def is_complete(self, v: int) -> bool:
        return self._moves[v] is not None

    def frontier(self) -> list[int]:
        return [v for v, m in enumerate(self._moves) if m is None]

    @property
    def is_total(self) -> bool:
        return all(m is not None for m in self._moves)

    def color(self, v: int):
        return None if self.colors is None else self.colors[v]

    def index_of_id(self, vid: int) -> int:
        if self._id_index is None:
            self._id_index = {x: i for i, x in enumerate(self.ids)}
        return self._id_index[vid]

    def index_of_coord(self, c) -> int:
        if self._coord_index is None:
            if self.coords is None:
                raise UrsLabError("graph has no coordinates")
            self._coord_index = {x: i for i, x in enumerate(self.coords)}
        return self._coord_index[c]

    def with_colors(self, colors) -> "Graph":
        if isinstance(colors, dict):
            colors = [colors.get(v) for v in range(len(self))]
        return Graph(self.gens, self.table, colors=colors, ids=self.ids, coords=self.coords)

    def uncolored(self) -> "Graph":
        return Graph(self.gens, self.table, ids=self.ids, coords=self.coords)

    def neighbors(self, v: int) -> list[int]:
        """Distinct known non-loop neighbours of ``v`` (underlying simple graph)."""
        seen = []
        for t in self.table[v]:
            if t >= 0 and t != v and t not in seen:
                seen.append(t)
        return seen

    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v) for v in range(len(self))]

    def edges(self) -> list[tuple[int, int]]:
        """Edges of the underlying simple graph as sorted pairs."""
        out = set()
        for v in range(len(self)):
            for t in self.table[v]:
                if t > v:
                    out.add((v, t))
                elif 0 <= t < v:
                    out.add((t, v))
        return sorted(out)

    def max_degree(self) -> int:
        return max((len(self.neighbors(v)) for v in range(len(self))), default=0)

    def check(self) -> None:
        """Raise if some known transition is not undone by its inverse label."""
        inv = self.gens.inverse
        for v, row in enumerate(self.table):
            for g, t in enumerate(row):
                if t >= 0:
                    back = self.table[t][inv[g]]
                    if back not in (-1, v):
                        raise UrsLabError(
                            f"Schreier determinism fails at vertex {v}, label {self.gens.names[g]}")

    def induced(self, vertices: Iterable[int]) -> "Graph":
        """Window on ``vertices``: transitions leaving the set become unknown."""
        vs = list(vertices)
        pos = {v: i for i, v in enumerate(vs)}
        table = [[pos.get(t, -1) if t >= 0 else -1 for t in self.table[v]] for v in vs]
        colors = None if self.colors is None else [self.colors[v] for v in vs]
        coords = None if self.coords is None else [self.coords[v] for v in vs]
        return Graph(self.gens, table, colors=colors, ids=[self.ids[v] for v in vs], coords=coords)


def _coord_id(coord) -> int:
    h = hashlib.blake2b(repr(coord).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") & 0x7FFFFFFFFFFFFFFF


class LazyView:
    """Infinite (or large) Schreier graph explored on demand.

    Vertices are canonical coordinates (hashable); ``step(coord, g)`` must be
    a pure function giving the neighbour along label ``g``.  Vertex ids are
    64-bit hashes of the coordinates.
    """

    def __init__(self, gens: GeneratorSet, step: Callable, origin, color: Callable | None = None,
                 name: str = "lazy"):
        self.gens = gens
        self.step = step
        self.origin = origin
        self.color_fn = color
        self.name = name
        self._registry: dict[int, Hashable] = {}

    def neighbor(self, c, g: int):
        return self.step(c, g)

    def moves(self, c):
        out = []
        for g in range(len(self.gens)):
            t = self.step(c, g)
            if t != c:
                out.append((g, t))
        return tuple(out)

    def color(self, c):
        return None if self.color_fn is None else self.color_fn(c)

    def vertex_id(self, c) -> int:
        vid = _coord_id(c)
        prev = self._registry.setdefault(vid, c)
        if prev != c:
            raise UrsLabError(f"vertex id collision between {prev!r} and {c!r}")
        return vid

    def coordinate(self, vid: int):
        return self._registry[vid]

    def materialize(self, radius: int, center=None) -> Graph:
        """Finite window ``B_radius(center)``; rows of the outer shell that
        leave the window are marked unknown."""
        center = self.origin if center is None else center
        return self.materialize_set(self.ball_coords(center, radius))

    def ball_coords(self, center, radius: int) -> list:
        order = [center]
        dist = {center: 0}
        i = 0
        while i < len(order):
            c = order[i]
            i += 1
            if dist[c] >= radius:
                continue
            for _, t in self.moves(c):
                if t not in dist:
                    dist[t] = dist[c] + 1
                    order.append(t)
        return order

    def materialize_set(self, coords: Sequence) -> Graph:
        coords = list(coords)
        pos = {c: i for i, c in enumerate(coords)}
        k = len(self.gens)
        table = []
        for c in coords:
            table.append([pos.get(self.step(c, g), -1) for g in range(k)])
        colors = None
        if self.color_fn is not None:
            colors = [self.color_fn(c) for c in coords]
        ids = [self.vertex_id(c) for c in coords]
        return Graph(self.gens, table, colors=colors, ids=ids, coords=coords)


@dataclass(frozen=True, eq=False)
class RootedBall:
    """Rooted labeled ball in canonical BFS order (root has index 0).

    ``moves[i]`` lists the non-loop transitions ``(label, j)`` of vertex ``i``
    for inner vertices (distance ``< radius``) and is ``None`` on the outer
    shell.  ``vertices[i]`` is the source vertex in the graph the ball was cut
    from.
    """

    radius: int
    k: int
    vertices: tuple
    dist: tuple
    moves: tuple
    colors: tuple | None = None
    index: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.vertices)

    def neighbor(self, i: int, g: int) -> int:
        m = self.moves[i]
        if m is None:
            raise FrontierError("outer-shell vertices carry no transitions")
        for h, t in m:
            if h == g:
                return t
        return i

    def color(self, i: int):
        return None if self.colors is None else self.colors[i]

    def sub_ball(self, i: int, r: int) -> "RootedBall":
        """Ball of radius ``r`` around canonical vertex ``i``; its ``vertices``
        are indices into this ball.  Requires ``dist[i] + r <= radius``."""
        if self.dist[i] + r > self.radius:
            raise FrontierError(f"sub-ball of radius {r} at depth {self.dist[i]} "
                                f"exceeds ball radius {self.radius}")
        return _bfs_ball(i, r, self._moves_of, self.color if self.colors is not None else None,
                         self.k)

    def _moves_of(self, i: int):
        m = self.moves[i]
        if m is None:
            raise FrontierError("outer-shell vertices carry no transitions")
        return m

    def code(self, exact: bool = False) -> bytes:
        return ball_code(self, exact=exact)

    def walk(self, i: int, word: Sequence[int]) -> int:
        for g in word:
            i = self.neighbor(i, g)
        return i


def _bfs_ball(root, r: int, moves_of, color_of, k: int) -> RootedBall:
    order = [root]
    index = {root: 0}
    dist = [0]
    raw = []
    i = 0
    while i < len(order):
        d = dist[i]
        if d < r:
            m = moves_of(order[i])
            for _, t in m:
                if t not in index:
                    index[t] = len(order)
                    order.append(t)
                    dist.append(d + 1)
            raw.append(m)
        i += 1
    moves = []
    for j, m in enumerate(raw):
        moves.append(tuple((g, index[t]) for g, t in m))
    moves.extend([None] * (len(order) - len(raw)))
    colors = None
    if color_of is not None:
        colors = tuple(color_of(v) for v in order)
    return RootedBall(radius=r, k=k, vertices=tuple(order), dist=tuple(dist),
                      moves=tuple(moves), colors=colors, index=index)


def extract_ball(view, v, r: int) -> RootedBall:
    """Rooted ball of radius ``r`` around ``v`` in canonical BFS order.

    Works for :class:`Graph` (``v`` a vertex index), :class:`LazyView` (``v`` a
    coordinate) and :class:`RootedBall` (``v`` a canonical index).  Raises
    :class:`FrontierError` if an inner vertex of the ball has unmaterialized
    transitions; partial balls are never returned.
    """
    if r < 0:
        raise ValueError("radius must be non-negative")
    if isinstance(view, RootedBall):
        return view.sub_ball(v, r)
    colored = getattr(view, "colors", None) is not None or getattr(view, "color_fn", None) is not None
    return _bfs_ball(v, r, view.moves, view.color if colored else None, len(view.gens))


def ball_code(b: RootedBall, exact: bool = False) -> bytes:
    """Canonical code of a rooted ball.

    Labels act as functions, so BFS that scans labels in their fixed order
    numbers the vertices canonically; the resulting transition table (plus
    colors) is a complete isomorphism invariant.  With ``exact=True`` the
    serialized table itself is returned, otherwise a 128-bit BLAKE2 digest.
    """
    inner = sum(1 for m in b.moves if m is not None)
    buf = array("q", [b.radius, b.k, len(b.vertices), inner])
    for m in b.moves:
        if m is None:
            break
        buf.append(len(m))
        for g, t in m:
            buf.append(g)
            buf.append(t)
    raw = buf.tobytes()
    if b.colors is not None:
        raw += b"|" + "\x1f".join(repr(c) for c in b.colors).encode("utf8")
    if exact:
        return raw
    return hashlib.blake2b(raw, digest_size=16).digest()


def schreier_distance(view1, root1, view2, root2, r_max: int) -> Fraction:
    """Ball-agreement distance ``2**-r`` between two rooted graphs.

    ``r`` is the largest radius ``<= r_max`` with isomorphic balls.  Returns 0
    when the balls agree all the way to ``r_max`` (meaning "at most
    ``2**-r_max``") and 2 when even the root colors differ.
    """
    if view1.gens != view2.gens:
        raise UrsLabError("views use different generator sets")
    best = -1
    for r in range(r_max + 1):
        c1 = ball_code(extract_ball(view1, root1, r), exact=True)
        c2 = ball_code(extract_ball(view2, root2, r), exact=True)
        if c1 != c2:
            break
        best = r
    if best < 0:
        return Fraction(2)
    if best == r_max:
        return Fraction(0)
    return Fraction(1, 2 ** best)


def root_change(view, root, word) -> object:
    """Endpoint of the walk from ``root`` reading ``word`` left to right."""
    for g in view.gens.word(word):
        root = view.neighbor(root, g)
    return root


def automorphism_transport(view: Graph, v: int, w: int):
    """Test whether the label-forced map ``v -> w`` is a colored automorphism.

    A labeled automorphism is determined by the image of one vertex, so the
    map is propagated along every label from ``v``.  Returns ``(True,
    mapping)`` if it is a well-defined, injective, color-preserving map on
    the whole (finite, connected) graph, else ``(False, None)``.
    """
    if not view.is_total:
        raise UrsLabError("automorphism_transport needs a finite view without frontier")
    n = len(view)
    k = len(view.gens)
    if not is_connected(view):
        raise UrsLabError("view is not connected")
    phi = {v: w}
    used = {w}
    queue = deque([v])
    table = view.table
    while queue:
        x = queue.popleft()
        y = phi[x]
        if view.color(x) != view.color(y):
            return False, None
        for g in range(k):
            a, b = table[x][g], table[y][g]
            if a in phi:
                if phi[a] != b:
                    return False, None
            else:
                if b in used:
                    return False, None
                phi[a] = b
                used.add(b)
                queue.append(a)
    if len(phi) != n:
        return False, None
    return True, [phi[x] for x in range(n)]


def distances(view, source, max_r: int | None = None, within=None) -> dict:
    """BFS distances from ``source`` (a vertex or an iterable of vertices) over
    known transitions, optionally restricted to the vertex set ``within``."""
    if isinstance(source, (list, tuple, set, frozenset)):
        sources = list(source)
    else:
        sources = [source]
    dist = {s: 0 for s in sources}
    queue = deque(sources)
    while queue:
        x = queue.popleft()
        d = dist[x]
        if max_r is not None and d >= max_r:
            continue
        for t in view.neighbors(x):
            if t not in dist and (within is None or t in within):
                dist[t] = d + 1
                queue.append(t)
    return dist


def is_connected(view: Graph) -> bool:
    if len(view) == 0:
        return True
    return len(distances(view, 0)) == len(view)
