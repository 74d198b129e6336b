"""Local kernels: operators whose entries depend only on rooted ball types.

A kernel is stored intensionally.  ``K.radius`` is the radius of the ball
around ``x`` that determines the whole row ``K(x, .)``; ``K.width`` bounds
the distance between ``x`` and any ``y`` with ``K(x, y) != 0``.  A row is a
dict from canonical in-ball addresses to complex values, computed by a rule
on the :class:`~urslab.schreier.RootedBall` and cached by ball code.

The radius is always at least the width, since addresses live in the ball.
Composite kernels need larger radii than widths:

* ``K + L``: radius ``max(R_K, R_L)``
* ``K L``: radius ``max(R_K, w_K + R_L)``
* ``K*``: radius ``w_K + R_K``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ._util import FrontierError, UrsLabError, rng_stream
from .schreier import GeneratorSet, LazyView, RootedBall, ball_code, extract_ball

__all__ = [
    "LocalKernel",
    "TruncatedOperator",
    "NormEstimate",
    "TraceReport",
    "WindowTrace",
    "LocalVectors",
    "CPReport",
    "identity_kernel",
    "kappa",
    "rho",
    "rho_shift",
    "diag",
    "qr_project",
    "kernel_add",
    "kernel_mul",
    "kernel_star",
    "kernel_scale",
    "kernel_eval",
    "random_kernel",
    "truncate",
    "measured_width",
    "norm_estimate",
    "amenable_trace",
    "ball_vectors",
    "cp_approx",
    "kernel_to_text",
    "kernel_from_text",
]


class LocalKernel:
    """Kernel ``K(x, y)`` given by a row rule on rooted balls.

    ``rule(ball)`` receives the radius-``radius`` ball around ``x`` and returns
    ``{address: value}`` for the nonzero entries of the row.
    """

    def __init__(self, gens: GeneratorSet, width: int, radius: int, rule: Callable,
                 name: str = "K"):
        if radius < width:
            raise ValueError("kernel radius must be at least its width")
        self.gens = gens
        self.width = int(width)
        self.radius = int(radius)
        self._rule = rule
        self.name = name
        self.table: dict = {}

    def __repr__(self) -> str:
        return f"<LocalKernel {self.name} width={self.width} radius={self.radius}>"

    def row(self, ball: RootedBall) -> dict:
        """Row of ``K`` at the root of ``ball`` (radius must equal ``self.radius``)."""
        if ball.radius != self.radius:
            ball = ball.sub_ball(0, self.radius)
        key = ball_code(ball)
        hit = self.table.get(key)
        if hit is None:
            hit = {int(a): complex(v) for a, v in self._rule(ball).items() if v != 0}
            self.table[key] = hit
        return hit

    def row_at(self, view, x) -> tuple[RootedBall, dict]:
        ball = extract_ball(view, x, self.radius)
        return ball, self.row(ball)

    # arithmetic sugar
    def __add__(self, other):
        return kernel_add(self, other)

    def __sub__(self, other):
        return kernel_add(self, kernel_scale(other, -1))

    def __matmul__(self, other):
        return kernel_mul(self, other)

    def __mul__(self, c):
        return kernel_scale(self, c)

    __rmul__ = __mul__

    def star(self):
        return kernel_star(self)


def _check_gens(K, L):
    if K.gens != L.gens:
        raise UrsLabError("kernels use different generator sets")


def _sub_row(K: LocalKernel, ball: RootedBall, i: int) -> dict:
    """Row of ``K`` at vertex ``i`` of ``ball``, addressed in ``ball``."""
    sub = ball.sub_ball(i, K.radius)
    row = K.row(sub)
    verts = sub.vertices
    return {verts[a]: v for a, v in row.items()}


def identity_kernel(gens: GeneratorSet) -> LocalKernel:
    return LocalKernel(gens, 0, 0, lambda b: {0: 1.0}, name="1")


def kernel_scale(K: LocalKernel, c: complex) -> LocalKernel:
    return LocalKernel(K.gens, K.width, K.radius,
                       lambda b: {a: c * v for a, v in K.row(b).items()}, name=f"{c}*{K.name}")


def kernel_add(K: LocalKernel, L: LocalKernel) -> LocalKernel:
    _check_gens(K, L)
    R = max(K.radius, L.radius)

    def rule(b):
        out = dict(_sub_row(K, b, 0))
        for a, v in _sub_row(L, b, 0).items():
            out[a] = out.get(a, 0) + v
        return out

    return LocalKernel(K.gens, max(K.width, L.width), R, rule, name=f"({K.name}+{L.name})")


def kernel_mul(K: LocalKernel, L: LocalKernel) -> LocalKernel:
    """Product ``KL(x, y) = sum_z K(x, z) L(z, y)``."""
    _check_gens(K, L)
    R = max(K.radius, K.width + L.radius)

    def rule(b):
        out = {}
        for z, kv in _sub_row(K, b, 0).items():
            for y, lv in _sub_row(L, b, z).items():
                out[y] = out.get(y, 0) + kv * lv
        return out

    return LocalKernel(K.gens, K.width + L.width, R, rule, name=f"{K.name}{L.name}")


def kernel_star(K: LocalKernel) -> LocalKernel:
    """Adjoint ``K*(x, y) = conj(K(y, x))``."""
    R = K.width + K.radius

    def rule(b):
        out = {}
        for y in range(len(b)):
            if b.dist[y] > K.width:
                break
            v = _sub_row(K, b, y).get(0)
            if v is not None:
                out[y] = v.conjugate()
        return out

    return LocalKernel(K.gens, K.width, R, rule, name=f"{K.name}*")


def kappa(gens: GeneratorSet, word) -> LocalKernel:
    """Permutation kernel with ``kappa(g)(x, y) = 1`` iff ``y = g^{-1} x``.

    Words act on the left, so ``g^{-1} x`` is reached from ``x`` by reading
    the inverse letters of ``g`` from left to right.
    """
    w = gens.word(word)
    steps = [gens.inverse[g] for g in w]

    def rule(b):
        return {b.walk(0, steps): 1.0}

    return LocalKernel(gens, len(w), len(w), rule, name=f"kappa({''.join(gens.names[g] for g in w)})")


def _class_lookup(partition, ball):
    code = ball_code(ball, exact=partition.exact)
    cid = partition.code_to_class.get(code)
    if cid is None:
        raise UrsLabError("ball type not in the partition; kernel undefined here")
    return cid


def rho(gens: GeneratorSet, a, partition) -> LocalKernel:
    """Diagonal kernel ``rho(a)(x, x) = a(class of x)`` for a function on the
    classes of ``partition`` (a sequence or mapping indexed by class id)."""
    r = partition.radius

    def rule(b):
        return {0: a[_class_lookup(partition, b)]}

    return LocalKernel(gens, 0, r, rule, name="rho")


def rho_shift(gens: GeneratorSet, a, partition, word) -> LocalKernel:
    """Diagonal kernel of the translate ``g(a)(x) = a(g^{-1} x)``."""
    w = gens.word(word)
    steps = [gens.inverse[g] for g in w]
    r = partition.radius

    def rule(b):
        y = b.walk(0, steps)
        return {0: a[_class_lookup(partition, b.sub_ball(y, r))]}

    return LocalKernel(gens, 0, r + len(w), rule, name="rho_shift")


def diag(K: LocalKernel) -> LocalKernel:
    """Diagonal part ``D(K)``."""

    def rule(b):
        v = K.row(b).get(0)
        return {} if v is None else {0: v}

    return LocalKernel(K.gens, 0, K.radius, rule, name=f"D({K.name})")


def qr_project(K: LocalKernel, r: int, exact: bool = True) -> LocalKernel:
    """Block compression ``Q_r(K)(x, y) = K(x, y) [x and y have equal r-balls]``."""
    R = max(K.radius, K.width + r)

    def rule(b):
        root = ball_code(b.sub_ball(0, r), exact=exact)
        out = {}
        for y, v in _sub_row(K, b, 0).items():
            if ball_code(b.sub_ball(y, r), exact=exact) == root:
                out[y] = v
        return out

    return LocalKernel(K.gens, K.width, R, rule, name=f"Q{r}({K.name})")


def random_kernel(gens: GeneratorSet, width: int, seed: int = 0, density: float = 1.0,
                  complex_values: bool = True) -> LocalKernel:
    """Kernel with pseudo-random entries that depend only on ball type and address."""

    def rule(b):
        code = ball_code(b)
        rng = rng_stream(seed, "random_kernel:" + code.hex())
        out = {}
        for y in range(len(b)):
            if rng.random() < density:
                re, im = rng.standard_normal(2)
                out[y] = complex(re, im if complex_values else 0.0)
        return out

    return LocalKernel(gens, width, width, rule, name=f"rand{seed}")


def kernel_eval(K: LocalKernel, view, x, y) -> complex:
    """``K(x, y)``; zero when ``y`` is outside the radius-``radius`` ball."""
    ball, row = K.row_at(view, x)
    idx = ball.index.get(y)
    if idx is None:
        return 0j
    return row.get(idx, 0j)


# --------------------------------------------------------------------------
# finite truncations

def _grow(view, sources, r):
    """Vertices within distance ``r`` of ``sources`` in BFS order."""
    order = list(dict.fromkeys(sources))
    dist = {v: 0 for v in order}
    i = 0
    lazy = isinstance(view, LazyView)
    while i < len(order):
        x = order[i]
        i += 1
        if dist[x] >= r:
            continue
        nbrs = [t for _, t in view.moves(x)] if lazy else view.neighbors(x)
        for t in nbrs:
            if t not in dist:
                dist[t] = dist[x] + 1
                order.append(t)
    return order, dist


@dataclass
class TruncatedOperator:
    """Matrix of a kernel on a window: a core plus a collar.

    ``matrix[i, j] = K(vertices[i], vertices[j])``.  Rows whose ball could not
    be materialized are zero and flagged in ``row_ok``; rows outside the core
    miss entries leaving the window and are flagged by ``core``.
    """

    vertices: list
    index: dict
    matrix: np.ndarray
    core: np.ndarray
    row_ok: np.ndarray
    padding: int

    @property
    def core_idx(self) -> np.ndarray:
        return np.flatnonzero(self.core)

    def core_block(self) -> np.ndarray:
        c = self.core_idx
        return self.matrix[np.ix_(c, c)]


def truncate(K: LocalKernel, view, core: Iterable, padding: int | None = None,
             vertices: Sequence | None = None) -> TruncatedOperator:
    """Truncation of ``K`` to ``core`` plus a collar of width ``padding``
    (default: the kernel width).  ``vertices`` fixes the window explicitly."""
    core = list(core)
    pad = K.width if padding is None else padding
    if vertices is None:
        verts, _ = _grow(view, core, pad)
    else:
        verts = list(vertices)
    index = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    M = np.zeros((n, n), dtype=complex)
    ok = np.ones(n, dtype=bool)
    for i, x in enumerate(verts):
        try:
            ball, row = K.row_at(view, x)
        except FrontierError:
            ok[i] = False
            continue
        for a, v in row.items():
            j = index.get(ball.vertices[a])
            if j is not None:
                M[i, j] = v
    cmask = np.zeros(n, dtype=bool)
    for v in core:
        cmask[index[v]] = True
    return TruncatedOperator(verts, index, M, cmask, ok, pad)


def measured_width(K: LocalKernel, view, vertices: Iterable) -> int:
    """Largest distance between ``x`` and a ``y`` with ``K(x, y) != 0``."""
    w = 0
    for x in vertices:
        ball, row = K.row_at(view, x)
        for a in row:
            w = max(w, ball.dist[a])
    return w


@dataclass
class NormEstimate:
    lower: float
    upper: float
    per_window: list = field(default_factory=list)
    converged: bool = True


def _power_lower(A: np.ndarray, iters: int = 2000, tol: float = 1e-13):
    """Largest singular value of ``A`` from below by power iteration on ``A^H A``.
    Every iterate gives a valid lower bound; the best one is returned."""
    m = A.shape[1]
    if m == 0:
        return 0.0, True
    v = np.ones(m, dtype=complex) / math.sqrt(m)
    best = 0.0
    prev = -1.0
    for _ in range(iters):
        Av = A @ v
        val = float(np.linalg.norm(Av))
        best = max(best, val)
        w = A.conj().T @ Av
        nw = np.linalg.norm(w)
        if nw == 0:
            return best, True
        v = w / nw
        if abs(val - prev) <= tol * max(1.0, val):
            return best, True
        prev = val
    return best, False


def norm_estimate(K: LocalKernel, view, cores: Sequence[Iterable], iters: int = 2000) -> NormEstimate:
    """Lower and upper bounds for the operator norm of ``K``.

    Lower: for each core, the norm of ``K`` restricted to vectors supported on
    the core (columns of the padded truncation), by power iteration.
    Upper: the Schur bound from the row sums of ``K`` and ``K*`` over every
    ball type met in the windows.
    """
    Ks = kernel_star(K)
    lower = 0.0
    per = []
    conv = True
    row_sup = 0.0
    col_sup = 0.0
    for core in cores:
        T = truncate(K, view, core)
        if not T.row_ok.all():
            raise FrontierError("window rows could not be evaluated; enlarge the view")
        A = T.matrix[:, T.core_idx]
        val, ok = _power_lower(A, iters)
        conv &= ok
        per.append(val)
        lower = max(lower, val)
        for x in T.vertices:
            _, r1 = K.row_at(view, x)
            row_sup = max(row_sup, sum(abs(v) for v in r1.values()))
            try:
                _, r2 = Ks.row_at(view, x)
            except FrontierError:
                continue
            col_sup = max(col_sup, sum(abs(v) for v in r2.values()))
    upper = math.sqrt(row_sup * col_sup)
    return NormEstimate(lower, upper, per, conv)


# --------------------------------------------------------------------------
# amenable traces

@dataclass
class WindowTrace:
    size: int
    value: complex
    defect_hs: float
    defect: float
    boundary_ratio: float
    defect_bound: float


@dataclass
class TraceReport:
    windows: list

    @property
    def values(self) -> list:
        return [w.value for w in self.windows]

    @property
    def defects(self) -> list:
        return [w.defect for w in self.windows]

    def oscillation(self) -> float:
        vals = self.values
        if len(vals) < 2:
            return 0.0
        return max(abs(a - b) for a in vals for b in vals)


def amenable_trace(K: LocalKernel, view, windows: Sequence[Iterable]) -> TraceReport:
    """Normalized traces ``<K P, P>_HS / ||P||_HS^2`` and commutator defects
    ``||K P - P K||_HS / ||P||_HS`` for the projections onto each window.

    ``defect_bound`` is ``M sqrt(2 c b / |F|)`` where ``M`` is the largest
    entry, ``c`` the number of window vertices within ``width - 1`` of the
    boundary and ``b`` the largest ``width``-ball: only pairs straddling the
    boundary contribute to the commutator.
    """
    out = []
    w = K.width
    for F in windows:
        F = list(F)
        fset = set(F)
        T = truncate(K, view, F, padding=max(w, 1))
        M = T.matrix
        inF = np.array([v in fset for v in T.vertices])
        if not T.row_ok.all():
            raise FrontierError("trace window needs its collar materialized")
        tr = sum(M[T.index[x], T.index[x]] for x in F)
        C = M * (inF[None, :].astype(float) - inF[:, None].astype(float))
        hs = float(np.linalg.norm(C))
        # boundary statistics
        bnd = [x for x in F if any(
            t not in fset for t in ([u for _, u in view.moves(x)] if isinstance(view, LazyView)
                                    else view.neighbors(x)))]
        collar = 0
        ball_max = 0
        if w > 0 and bnd:
            _, dcol = _grow(view, bnd, w - 1)
            collar = sum(1 for v in dcol if v in fset)
            for x in bnd:
                ball_max = max(ball_max, len(_grow(view, [x], w)[0]))
        Mmax = float(np.abs(M).max()) if M.size else 0.0
        bound = Mmax * math.sqrt(2 * collar * ball_max / len(F))
        out.append(WindowTrace(len(F), complex(tr) / len(F), hs, hs / math.sqrt(len(F)),
                               len(bnd) / len(F), bound))
    return TraceReport(out)


# --------------------------------------------------------------------------
# completely positive approximations

@dataclass
class LocalVectors:
    """Unit vectors chosen by ball type: ``rule(ball)`` maps the ball around
    ``x`` (radius ``radius``) to ``{address: value}`` supported within
    distance ``support``."""

    support: int
    radius: int
    rule: Callable

    def vector(self, view, x) -> dict:
        b = extract_ball(view, x, self.radius)
        return {b.vertices[a]: v for a, v in self.rule(b).items()}


def ball_vectors(k: int) -> LocalVectors:
    """``1/sqrt|B_k(x)|`` on the ball ``B_k(x)``."""

    def rule(b):
        c = 1.0 / math.sqrt(len(b))
        return {a: c for a in range(len(b))}

    return LocalVectors(k, k, rule)


@dataclass
class CPReport:
    kernel: LocalKernel
    deviation: float
    closed_form_gap: float
    locality_ok: bool
    checked_rows: int


def _local_sets(view, x, vectors: LocalVectors, N: int):
    """``H_x``: the support ball padded in BFS order to exactly ``N`` vertices."""
    r = vectors.support
    order, dist = _grow(view, [x], r)
    if len(order) < N:
        more, _ = _grow(view, [x], r + 1)
        extra = [v for v in more if dist.get(v) is None]
        k = r + 1
        while len(order) + len(extra) < N:
            k += 1
            more, _ = _grow(view, [x], k)
            extra = [v for v in more if v not in dist]
        order = order + extra[: N - len(order)]
    return order


def cp_approx(K: LocalKernel, view, core: Iterable, vectors: LocalVectors,
              N: int | None = None) -> CPReport:
    """``Psi(Phi(K))`` on a window, computed literally.

    ``Phi`` compresses ``K`` to the local sets ``H_x`` and ``Psi`` sums
    ``M(x)^* T_x M(x)`` with ``M(x)`` multiplication by ``y -> v_y(x)``.  The
    result is compared entrywise with the closed form ``K(y, z) <v_y, v_z>``
    and with ``K`` itself on the core.  The returned kernel is the closed
    form as a local kernel; ``locality_ok`` records that literal rows agree
    on equal ball types.
    """
    core = list(core)
    s = vectors.support
    w = K.width
    # x ranges over every vertex whose local set can meet a core row
    xs, _ = _grow(view, core, s)
    vec_pts, _ = _grow(view, core, w)
    vec = {}
    for y in vec_pts:
        vec[y] = vectors.vector(view, y)
    if N is None:
        N = max(len(_grow(view, [x], s)[0]) for x in xs)
    acc = {}
    for x in xs:
        H = _local_sets(view, x, vectors, N)
        hset = set(H)
        # T_x = P_x K P_x; only rows/cols with v_y(x) != 0 matter
        ys = [y for y in H if y in vec and x in vec[y]]
        for y in ys:
            cy = vec[y][x]
            ball, row = K.row_at(view, y)
            for a, kv in row.items():
                z = ball.vertices[a]
                if z in hset and z in vec and x in vec[z]:
                    acc[(y, z)] = acc.get((y, z), 0) + cy * kv * vec[z][x]
    dev = 0.0
    gap = 0.0
    for y in core:
        ball, row = K.row_at(view, y)
        for a, kv in row.items():
            z = ball.vertices[a]
            closed = kv * sum(vec[y].get(t, 0.0) * v for t, v in vec[z].items())
            lit = acc.get((y, z), 0)
            gap = max(gap, abs(lit - closed))
            dev = max(dev, abs(lit - kv))
    out = _cp_kernel(K, vectors)
    # locality: rows of the literal output agree wherever the output kernel's balls agree
    seen = {}
    loc_ok = True
    for y in core:
        b = extract_ball(view, y, out.radius)
        code = ball_code(b, exact=True)
        row = {}
        for a in range(len(b)):
            z = b.vertices[a]
            if (y, z) in acc and abs(acc[(y, z)]) > 0:
                row[a] = acc[(y, z)]
        prev = seen.setdefault(code, row)
        if prev is not row:
            keys = set(prev) | set(row)
            if any(abs(prev.get(k, 0) - row.get(k, 0)) > 1e-12 for k in keys):
                loc_ok = False
    return CPReport(out, dev, gap, loc_ok, len(core))


def _cp_kernel(K: LocalKernel, vectors: LocalVectors) -> LocalKernel:
    R = max(K.radius, K.width + vectors.radius)

    def rule(b):
        vy = {b.sub_ball(0, vectors.radius).vertices[a]: v
              for a, v in vectors.rule(b.sub_ball(0, vectors.radius)).items()}
        out = {}
        for z, kv in _sub_row(K, b, 0).items():
            sb = b.sub_ball(z, vectors.radius)
            vz = {sb.vertices[a]: v for a, v in vectors.rule(sb).items()}
            ip = sum(vy.get(t, 0.0) * v for t, v in vz.items())
            if ip != 0:
                out[z] = kv * ip
        return out

    return LocalKernel(K.gens, K.width, R, rule, name=f"cp({K.name})")


# --------------------------------------------------------------------------
# file format

def kernel_to_text(K: LocalKernel) -> str:
    """Serialize the cached rows of ``K`` (every ball type evaluated so far)."""
    lines = [f"kernel width={K.width} gens={K.gens.digest()} locality={K.radius}"]
    for code in sorted(K.table):
        row = K.table[code]
        lines.append(f"row {code.hex()} {len(row)}")
        for a in sorted(row):
            v = row[a]
            lines.append(f"entry {code.hex()} {a} {v.real!r} {v.imag!r}")
    return "\n".join(lines) + "\n"


def kernel_from_text(text: str, gens: GeneratorSet) -> LocalKernel:
    """Table kernel from :func:`kernel_to_text` output; evaluating it on a ball
    type missing from the table raises."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise UrsLabError("line 1: empty kernel file")
    head = lines[0].split()
    if head[0] != "kernel":
        raise UrsLabError("line 1: expected 'kernel' header")
    fields = dict(p.split("=", 1) for p in head[1:])
    try:
        width = int(fields["width"])
        radius = int(fields.get("locality", width))
    except (KeyError, ValueError) as exc:
        raise UrsLabError(f"line 1: bad header ({exc})") from None
    if fields.get("gens") != gens.digest():
        raise UrsLabError("line 1: kernel was written for a different generator set")
    table = {}
    for ln, line in enumerate(lines[1:], 2):
        parts = line.split()
        if len(parts) == 3 and parts[0] == "row":
            try:
                table.setdefault(bytes.fromhex(parts[1]), {})
            except ValueError as exc:
                raise UrsLabError(f"line {ln}: {exc}") from None
            continue
        if len(parts) != 5 or parts[0] != "entry":
            raise UrsLabError(f"line {ln}: expected 'entry <code> <address> <re> <im>'")
        try:
            code = bytes.fromhex(parts[1])
            table.setdefault(code, {})[int(parts[2])] = complex(float(parts[3]), float(parts[4]))
        except ValueError as exc:
            raise UrsLabError(f"line {ln}: {exc}") from None

    def rule(b):
        code = ball_code(b)
        if code not in table:
            raise UrsLabError("ball type missing from the kernel table")
        return table[code]

    K = LocalKernel(gens, width, radius, rule, name="table")
    K.table.update({c: dict(r) for c, r in table.items()})
    return K
