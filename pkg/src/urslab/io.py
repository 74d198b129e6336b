"""Line-oriented text formats for graphs and colorings.

Graph file::

    gens <k> pairing <g>:<inverse>,... involutions <g>,...|-
    v <id> [color <symbol>] <g>:<target-id> ...

Every label appears on every vertex line, in generator order; an unknown
(frontier) transition is written ``<g>:?``.  Color symbols are compact JSON
(ints, strings, nested lists); lists come back as tuples.

Coloring file::

    coloring alphabet=<json> n=<vertices> nonrepetitive_upto=<n|-> proper_distance=<D|->
    color <vertex-id> <symbol>

Writers are deterministic, so parse followed by write reproduces the bytes.
"""
from __future__ import annotations

import json

from ._util import UrsLabError
from .coloring import Coloring
from .schreier import GeneratorSet, Graph

__all__ = [
    "ParseError",
    "graph_to_text",
    "graph_from_text",
    "coloring_to_text",
    "coloring_from_text",
    "encode_symbol",
    "decode_symbol",
]


class ParseError(UrsLabError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(t) for t in x]
    if x is None or isinstance(x, (bool, int, str)):
        return x
    if isinstance(x, float):
        return x
    raise UrsLabError(f"cannot write symbol of type {type(x).__name__}")


def _tupled(x):
    if isinstance(x, list):
        return tuple(_tupled(t) for t in x)
    return x


def encode_symbol(x) -> str:
    s = json.dumps(_jsonable(x), separators=(",", ":"), ensure_ascii=True)
    if any(ch.isspace() for ch in s):
        raise UrsLabError(f"symbol {x!r} contains whitespace")
    return s


def decode_symbol(s: str):
    return _tupled(json.loads(s))


def graph_to_text(g: Graph) -> str:
    gens = g.gens
    pairing = ",".join(f"{gens.names[i]}:{gens.names[gens.inverse[i]]}" for i in range(len(gens)))
    invs = [gens.names[i] for i in range(len(gens)) if gens.is_involution(i)]
    lines = [f"gens {len(gens)} pairing {pairing or '-'} involutions {','.join(invs) or '-'}"]
    ids = g.ids
    for v in range(len(g)):
        parts = ["v", str(ids[v])]
        if g.colors is not None:
            parts += ["color", encode_symbol(g.colors[v])]
        for i, t in enumerate(g.table[v]):
            parts.append(f"{gens.names[i]}:{'?' if t < 0 else ids[t]}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _parse_gens(line: str) -> GeneratorSet:
    parts = line.split()
    if len(parts) != 6 or parts[0] != "gens" or parts[2] != "pairing" or parts[4] != "involutions":
        raise ParseError(1, "expected 'gens <k> pairing <list> involutions <list>'")
    try:
        k = int(parts[1])
    except ValueError:
        raise ParseError(1, f"bad generator count {parts[1]!r}") from None
    pairs = [] if parts[3] == "-" else [p.split(":") for p in parts[3].split(",")]
    if any(len(p) != 2 for p in pairs) or len(pairs) != k:
        raise ParseError(1, f"pairing must list {k} entries '<g>:<inverse>'")
    names = [p[0] for p in pairs]
    index = {s: i for i, s in enumerate(names)}
    try:
        inverse = [index[p[1]] for p in pairs]
        gens = GeneratorSet(names, inverse)
    except (KeyError, ValueError) as exc:
        raise ParseError(1, f"inconsistent pairing ({exc})") from None
    invs = [] if parts[5] == "-" else parts[5].split(",")
    if invs != [names[i] for i in range(k) if gens.is_involution(i)]:
        raise ParseError(1, "involution list disagrees with the pairing")
    return gens


def graph_from_text(text: str) -> Graph:
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "empty graph file")
    gens = _parse_gens(lines[0])
    k = len(gens)
    rows = []
    for ln, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] != "v" or len(parts) < 2:
            raise ParseError(ln, "expected a vertex line 'v <id> ...'")
        try:
            vid = int(parts[1])
        except ValueError:
            raise ParseError(ln, f"bad vertex id {parts[1]!r}") from None
        rest = parts[2:]
        color = None
        has_color = False
        if rest and rest[0] == "color":
            if len(rest) < 2:
                raise ParseError(ln, "missing color symbol")
            try:
                color = decode_symbol(rest[1])
            except ValueError as exc:
                raise ParseError(ln, f"bad color symbol ({exc})") from None
            has_color = True
            rest = rest[2:]
        if len(rest) != k:
            raise ParseError(ln, f"expected {k} transitions, found {len(rest)}")
        targets = []
        for i, tok in enumerate(rest):
            name, sep, tgt = tok.partition(":")
            if not sep or name != gens.names[i]:
                raise ParseError(ln, f"transition {i + 1} should be '{gens.names[i]}:<target>'")
            if tgt == "?":
                targets.append(None)
            else:
                try:
                    targets.append(int(tgt))
                except ValueError:
                    raise ParseError(ln, f"bad target {tgt!r}") from None
        rows.append((ln, vid, has_color, color, targets))
    if not rows:
        raise ParseError(len(lines) + 1, "no vertex lines")
    index = {}
    for ln, vid, *_ in rows:
        if vid in index:
            raise ParseError(ln, f"duplicate vertex id {vid}")
        index[vid] = len(index)
    colored = {r[2] for r in rows}
    if len(colored) != 1:
        raise ParseError(rows[0][0], "either every vertex or no vertex carries a color")
    table = []
    for ln, vid, _, _, targets in rows:
        row = []
        for t in targets:
            if t is None:
                row.append(-1)
            elif t not in index:
                raise ParseError(ln, f"target {t} is not a vertex")
            else:
                row.append(index[t])
        table.append(row)
    colors = [r[3] for r in rows] if colored == {True} else None
    g = Graph(gens, table, colors=colors, ids=[r[1] for r in rows])
    try:
        g.check()
    except UrsLabError as exc:
        raise ParseError(1, f"not a Schreier graph: {exc}") from None
    return g


def coloring_to_text(c: Coloring, ids=None) -> str:
    vals = c.values
    ids = list(range(len(vals))) if ids is None else list(ids)
    nr = "-" if c.nonrepetitive_upto is None else c.nonrepetitive_upto
    pd = "-" if c.proper_distance is None else c.proper_distance
    lines = [f"coloring alphabet={encode_symbol(list(c.alphabet))} n={len(vals)} "
             f"nonrepetitive_upto={nr} proper_distance={pd}"]
    for v, x in enumerate(vals):
        if x is not None:
            lines.append(f"color {ids[v]} {encode_symbol(x)}")
    return "\n".join(lines) + "\n"


def coloring_from_text(text: str, ids=None) -> Coloring:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("coloring "):
        raise ParseError(1, "expected a 'coloring' header")
    try:
        fields = dict(p.split("=", 1) for p in lines[0].split()[1:])
        alphabet = decode_symbol(fields["alphabet"])
        n = int(fields["n"])
        nr = None if fields["nonrepetitive_upto"] == "-" else int(fields["nonrepetitive_upto"])
        pd = None if fields["proper_distance"] == "-" else int(fields["proper_distance"])
    except (KeyError, ValueError) as exc:
        raise ParseError(1, f"bad header ({exc})") from None
    pos = {i: i for i in range(n)} if ids is None else {int(x): i for i, x in enumerate(ids)}
    vals = [None] * n
    for ln, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "color":
            raise ParseError(ln, "expected 'color <vertex-id> <symbol>'")
        try:
            v = pos[int(parts[1])]
            vals[v] = decode_symbol(parts[2])
        except KeyError:
            raise ParseError(ln, f"unknown vertex id {parts[1]}") from None
        except ValueError as exc:
            raise ParseError(ln, str(exc)) from None
    return Coloring(vals, tuple(alphabet), nr, pd)
