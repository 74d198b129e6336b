"""Window certificates for recurrence, genericity and the ball-type classes.

Everything here is evidence at a finite scale: a window of a graph, a
radius, and a count of the vertices that had to be skipped because their
balls reached the window frontier.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from ._util import FrontierError, UrsLabError
from .schreier import Graph, automorphism_transport, ball_code, distances, extract_ball

__all__ = [
    "ClassPartition",
    "GenericityCertificate",
    "CoveringRadius",
    "er_classes",
    "refinement_map",
    "covering_radius",
    "repetition_window",
    "genericity_radius",
    "separation_radius",
    "z_regular",
    "nontrivial_automorphism",
]


@dataclass
class ClassPartition:
    """Window vertices grouped by the code of their radius-``r`` ball."""

    radius: int
    window: tuple
    code_to_class: dict
    class_of: dict
    members: list
    skipped: tuple = ()
    exact: bool = False

    @property
    def num_classes(self) -> int:
        return len(self.members)

    def codes(self) -> list:
        inv = {c: code for code, c in self.code_to_class.items()}
        return [inv[i] for i in range(len(self.members))]


@dataclass
class GenericityCertificate:
    R: int
    S: int | None
    window_size: int
    certified: bool
    counterexample: tuple | None = None
    frontier_skipped: int = 0
    window_spec: str = ""

    def to_text(self) -> str:
        ce = "-" if self.counterexample is None else f"{self.counterexample[0]},{self.counterexample[1]}"
        out = "certified" if self.certified else "counterexample"
        return (f"genericity R={self.R} S={self.S} outcome={out} pair={ce} "
                f"window={self.window_size} frontier_skipped={self.frontier_skipped} "
                f"spec={self.window_spec or '-'}")

    @classmethod
    def from_text(cls, text: str) -> "GenericityCertificate":
        parts = text.split()
        if not parts or parts[0] != "genericity":
            raise UrsLabError("line 1: expected a 'genericity' record")
        try:
            f = dict(p.split("=", 1) for p in parts[1:])
            pair = None if f["pair"] == "-" else tuple(int(t) for t in f["pair"].split(","))
            return cls(int(f["R"]), None if f["S"] == "None" else int(f["S"]),
                       int(f["window"]), f["outcome"] == "certified", pair,
                       int(f["frontier_skipped"]), "" if f["spec"] == "-" else f["spec"])
        except (KeyError, ValueError) as exc:
            raise UrsLabError(f"line 1: bad genericity record ({exc})") from None


@dataclass
class CoveringRadius:
    t: int
    num_classes: int
    frontier_bound: bool
    per_vertex: dict = field(default_factory=dict, repr=False)


def _codes(view, vertices, r, exact):
    out = {}
    skipped = []
    for v in vertices:
        try:
            out[v] = ball_code(extract_ball(view, v, r), exact=exact)
        except FrontierError:
            skipped.append(v)
    return out, skipped


def er_classes(view, window: Iterable | None = None, r: int = 0, skip_frontier: bool = False,
               exact: bool = False) -> ClassPartition:
    """Partition ``window`` by radius-``r`` ball codes.

    With ``skip_frontier=False`` a ball reaching the window frontier raises
    :class:`FrontierError`; otherwise such vertices are left out and listed
    in ``skipped``.
    """
    window = tuple(range(len(view)) if window is None else window)
    codes, skipped = _codes(view, window, r, exact)
    if skipped and not skip_frontier:
        raise FrontierError(f"{len(skipped)} window vertices have truncated {r}-balls")
    code_to_class = {}
    class_of = {}
    members = []
    for v in window:
        if v not in codes:
            continue
        c = codes[v]
        cid = code_to_class.get(c)
        if cid is None:
            cid = code_to_class[c] = len(members)
            members.append([])
        class_of[v] = cid
        members[cid].append(v)
    return ClassPartition(r, window, code_to_class, class_of, members, tuple(skipped), exact)


def refinement_map(fine: ClassPartition, coarse: ClassPartition) -> dict:
    """Map each class of ``fine`` to the class of ``coarse`` containing it."""
    if fine.window != coarse.window:
        raise UrsLabError("partitions come from different windows")
    if fine.radius < coarse.radius:
        raise UrsLabError("fine partition must have the larger radius")
    out = {}
    for cid, mem in enumerate(fine.members):
        targets = {coarse.class_of[v] for v in mem if v in coarse.class_of}
        if len(targets) != 1:
            raise UrsLabError(f"class {cid} of radius {fine.radius} is split by radius {coarse.radius}")
        out[cid] = targets.pop()
    return out


def covering_radius(view: Graph, window: Iterable | None = None, r: int = 0,
                    exact: bool = False) -> CoveringRadius:
    """Largest radius a window vertex needs before its ball meets every class.

    Classes are taken over the vertices whose ``r``-ball is materialized.
    ``frontier_bound`` is set when some search ran into the window frontier
    first, in which case the value is only window-relative.
    """
    part = er_classes(view, window, r, skip_frontier=True, exact=exact)
    k = part.num_classes
    t = 0
    hit_frontier = False
    per = {}
    for p in part.class_of:
        seen = {p}
        found = {part.class_of[p]}
        frontier = [p]
        rad = 0
        touched = not view.is_complete(p)
        while len(found) < k and frontier:
            rad += 1
            nxt = []
            for x in frontier:
                for y in view.neighbors(x):
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
                        if not view.is_complete(y):
                            touched = True
                        c = part.class_of.get(y)
                        if c is not None:
                            found.add(c)
            frontier = nxt
        if len(found) < k:
            raise UrsLabError(f"vertex {p} cannot reach every class inside the window")
        if touched:
            hit_frontier = True
        per[p] = rad
        t = max(t, rad)
    return CoveringRadius(t, k, hit_frontier, per)


def repetition_window(view: Graph, x, R: int, W: Iterable | None = None,
                      exact: bool = False) -> int | None:
    """Finite estimate of the recurrence constant ``S_{x,R}``.

    For every ``y`` in ``W`` find the nearest ``z`` whose ``R``-ball matches
    the one at ``x``; return the largest such distance, or None when some
    ``y`` has no match in the materialized region.
    """
    W = list(range(len(view)) if W is None else W)
    target = ball_code(extract_ball(view, x, R), exact=exact)
    cache = {}

    def matches(z):
        if z not in cache:
            try:
                cache[z] = ball_code(extract_ball(view, z, R), exact=exact) == target
            except FrontierError:
                cache[z] = False
        return cache[z]

    worst = 0
    for y in W:
        dist = {y: 0}
        q = deque([y])
        found = None
        while q:
            u = q.popleft()
            if matches(u):
                found = dist[u]
                break
            for t in view.neighbors(u):
                if t not in dist:
                    dist[t] = dist[u] + 1
                    q.append(t)
        if found is None:
            return None
        worst = max(worst, found)
    return worst


def genericity_radius(view: Graph, window: Iterable | None = None, R: int = 1, S_max: int = 8,
                      exact: bool = True, window_spec: str = "") -> GenericityCertificate:
    """Smallest ``S <= S_max`` separating every close pair by ``S``-ball codes.

    Pairs are distinct window vertices at distance ``1..R``.  A pair in which
    a vertex's ``S``-ball reaches the frontier is skipped, never reported as
    a counterexample; the number of skipped vertices is recorded.
    """
    window = list(range(len(view)) if window is None else window)
    if len(window) <= 1:
        return GenericityCertificate(R, 0, len(window), True, None, 0, window_spec)
    wset = set(window)
    pairs = []
    for v in window:
        for u, d in distances(view, v, max_r=R).items():
            if 0 < d and u in wset and v < u:
                pairs.append((v, u))
    pairs.sort()
    open_pairs = pairs
    skipped = set()
    for S in range(S_max + 1):
        involved = sorted({v for p in open_pairs for v in p})
        codes, sk = _codes(view, involved, S, exact)
        skipped.update(sk)
        still = [(a, b) for a, b in open_pairs
                 if a in codes and b in codes and codes[a] == codes[b]]
        if not still:
            return GenericityCertificate(R, S, len(window), True, None, len(skipped), window_spec)
        open_pairs = still
    return GenericityCertificate(R, S_max, len(window), False, open_pairs[0], len(skipped),
                                 window_spec)


def separation_radius(view: Graph, window: Iterable | None, n: int, r_max: int) -> int | None:
    """Smallest ``r`` such that distinct window vertices with equal
    ``r``-ball codes lie at distance ``>= n``; None if not reached by ``r_max``."""
    if n <= 1:
        return 0
    cert = genericity_radius(view, window, n - 1, r_max)
    return cert.S if cert.certified else None


def nontrivial_automorphism(view: Graph):
    """A colored-labeled automorphism moving vertex 0, or None."""
    if len(view) == 0:
        return None
    for w in range(1, len(view)):
        ok, phi = automorphism_transport(view, 0, w)
        if ok:
            return phi
    return None


def z_regular(view: Graph) -> bool:
    """True iff the finite colored graph has no nontrivial colored-labeled
    automorphism.  One base vertex suffices: automorphisms are determined by
    the image of a single vertex."""
    return nontrivial_automorphism(view) is None
