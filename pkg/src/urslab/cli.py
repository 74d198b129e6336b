"""Command line entry point: ``urslab <group> <command> [options]``.

Every run writes its artifact (to ``--out`` or stdout), prints a short text
report followed by a JSON block, and emits a run manifest
(``<out>.manifest.json``, or the last stderr line when writing to stdout).

Exit codes: 0 success, 1 certificate failure, 2 usage or malformed input,
3 budget exhausted.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from ._util import BudgetExceeded, UrsLabError
from .coloring import (find_repetitive_path, lll_alphabet_bound,
                       nonrepetitive_color, verify_witness)
from .io import (coloring_from_text, coloring_to_text, graph_from_text, graph_to_text)
from .schreier import Graph

EXIT_OK, EXIT_CERT, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class CertificateFailure(Exception):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report or {}


class _Run:
    """Collects inputs, outputs and the report of one invocation."""

    def __init__(self, args):
        self.args = args
        self.inputs = {}
        self.outputs = {}
        self.report = {}
        self.lines = []

    def read(self, path: str) -> str:
        data = Path(path).read_bytes()
        self.inputs[path] = hashlib.blake2b(data, digest_size=16).hexdigest()
        return data.decode("utf8")

    def graph(self, path: str) -> Graph:
        return graph_from_text(self.read(path))

    def emit(self, text: str) -> None:
        data = text.encode("utf8")
        out = self.args.out
        if out:
            Path(out).write_bytes(data)
            self.outputs[out] = hashlib.blake2b(data, digest_size=16).hexdigest()
        else:
            sys.stdout.write(text)
            self.outputs["-"] = hashlib.blake2b(data, digest_size=16).hexdigest()

    def say(self, line: str) -> None:
        self.lines.append(line)


# construct -----------------------------------------------------------------

def _construct(run: _Run):
    from . import constructions as cs
    a = run.args
    if a.command == "cycle":
        run.emit(graph_to_text(cs.cycle(a.n, involutions=a.involutions)))
        run.report.update(vertices=a.n)
    elif a.command == "grid":
        if a.product_coloring:
            edges, cols = cs.grid_edges(a.w, a.h)
            border = [j * a.w + i for j in range(a.h) for i in range(a.w)
                      if i in (0, a.w - 1) or j in (0, a.h - 1)]
            g, palette, rho = cs.product_colored_schreier(
                a.w * a.h, edges, cols, k=a.alphabet, n_max=a.nmax, seed=a.seed,
                open_vertices=border, budget_ms=a.budget_ms)
            run.report.update(palette_size=len(palette), alphabet=a.alphabet, nmax=a.nmax)
        else:
            g = cs.grid(a.w, a.h)
        run.emit(graph_to_text(g))
        run.report.update(vertices=len(g))
    elif a.command == "tree":
        g = cs.regular_tree(a.d, a.depth)
        run.emit(graph_to_text(g))
        run.report.update(vertices=len(g))
    elif a.command == "involution":
        n, edges, cols = _read_edges(run, a.edges)
        opened = [int(t) for t in a.open.split(",")] if a.open else []
        if a.product_coloring:
            g, palette, _ = cs.product_colored_schreier(
                n, edges, cols, k=a.alphabet, n_max=a.nmax, seed=a.seed,
                open_vertices=opened, budget_ms=a.budget_ms)
        else:
            g, palette = cs.graph_to_involution_schreier(n, edges, cols, opened)
        run.emit(graph_to_text(g))
        run.report.update(vertices=n, labels=len(palette))
    elif a.command == "tower":
        if a.kind == "cycle":
            tower = cs.cycle_cover_tower(a.levels, base_length=a.base_length)
        else:
            base = run.graph(a.base) if a.base else cs.random_cubic(a.base_size, 3, seed=a.seed)[0]
            tower = cs.voltage_z2_tower(base, a.levels, seed=a.seed)
        ok = tower.check()
        run.emit(graph_to_text(tower.levels[-1]))
        run.report.update(levels=[len(g) for g in tower.levels], covering=ok,
                          reseeds=tower.reseeds)
        if not ok:
            raise CertificateFailure("covering check failed", run.report)
    elif a.command == "nonexact":
        build = cs.build_nonexact(a.depth, seed=a.seed, base_size=a.base_size,
                                  girth_target=a.girth)
        checks = build.check()
        run.emit(build.manifest())
        run.report.update(checks=checks, vertices={f"G{i}": len(g) for i, g in build.G.items()},
                          T={str(j): t for j, t in build.T.items()})
        if not all(checks.values()):
            raise CertificateFailure("build invariant failed", run.report)


def _read_edges(run, path):
    """Edge list file: first line ``n <vertices>``, then ``<u> <v> <color>``."""
    lines = [ln for ln in run.read(path).splitlines() if ln.strip()]
    try:
        head = lines[0].split()
        if head[0] != "n":
            raise ValueError
        n = int(head[1])
    except (IndexError, ValueError):
        raise UrsLabError("line 1: expected 'n <vertices>'") from None
    edges, cols = [], []
    for ln, line in enumerate(lines[1:], 2):
        parts = line.split()
        if len(parts) != 3:
            raise UrsLabError(f"line {ln}: expected '<u> <v> <color>'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise UrsLabError(f"line {ln}: vertex numbers must be integers") from None
        cols.append(parts[2])
    return n, edges, cols


# color ---------------------------------------------------------------------

def _color(run: _Run):
    a = run.args
    g = run.graph(a.graph)
    if a.command == "nonrep":
        c = nonrepetitive_color(g, k=a.alphabet, n_max=a.nmax, seed=a.seed,
                                max_resamples=a.max_resamples, budget_ms=a.budget_ms,
                                method=a.method)
        run.emit(coloring_to_text(c, g.ids))
        run.report.update(alphabet=a.alphabet, nmax=a.nmax, method=a.method,
                          lll_bound=lll_alphabet_bound(max(1, g.max_degree())))
    elif a.command == "verify":
        c = coloring_from_text(run.read(a.coloring), g.ids)
        w = find_repetitive_path(g, c, n_max=a.nmax, budget_ms=a.budget_ms)
        if w is None:
            run.emit(f"nonrepetitive n_max={a.nmax} vertices={len(g)}\n")
            run.report.update(repetitive=False)
        else:
            ids = [g.ids[v] for v in w.path]
            run.emit(f"repetitive n={w.n} path={','.join(map(str, ids))}\n")
            run.report.update(repetitive=True, path=ids, n=w.n,
                              verified=verify_witness(g, c, w))
            run.say(f"witness path {' '.join(map(str, ids))}")
            raise CertificateFailure("repetitive path found", run.report)


# urs -----------------------------------------------------------------------

def _urs(run: _Run):
    from .urs import er_classes, genericity_radius, repetition_window
    a = run.args
    g = run.graph(a.graph)
    if a.command == "genericity":
        cert = genericity_radius(g, None, R=a.R, S_max=a.Smax, window_spec=Path(a.graph).name)
        run.emit(cert.to_text() + "\n")
        run.report.update(R=cert.R, S=cert.S, certified=cert.certified,
                          frontier_skipped=cert.frontier_skipped)
        if not cert.certified:
            pair = [g.ids[v] for v in cert.counterexample]
            run.report["counterexample"] = pair
            raise CertificateFailure("genericity counterexample", run.report)
    elif a.command == "classes":
        part = er_classes(g, None, a.r, skip_frontier=True)
        lines = [f"classes r={a.r} count={part.num_classes} skipped={len(part.skipped)}"]
        for cid, mem in enumerate(part.members):
            lines.append(f"class {cid} size={len(mem)} first={g.ids[mem[0]]}")
        run.emit("\n".join(lines) + "\n")
        run.report.update(r=a.r, classes=part.num_classes, skipped=len(part.skipped))
    elif a.command == "repetition":
        x = g.index_of_id(a.x)
        S = repetition_window(g, x, a.R)
        run.emit(f"repetition x={a.x} R={a.R} S={'-' if S is None else S}\n")
        run.report.update(S=S)
        if S is None:
            raise CertificateFailure("some vertex has no matching ball in the window", run.report)


# sofic ---------------------------------------------------------------------

def _sofic(run: _Run):
    from . import sofic as so
    a = run.args
    g = run.graph(a.graph)
    if a.command == "complete":
        F = list(range(len(g)))
        out, rep = so.complete_to_schreier(g, F, seed=a.seed, return_report=True)
        run.emit(graph_to_text(out))
        run.report.update(vertices=len(out), added=rep["added"],
                          fixed_points=len(rep["fixed_points"]))
    elif a.command == "bs":
        h = so.bs_histogram(g, a.r, exact=False)
        run.emit(h.to_text())
        run.report.update(r=a.r, types=len(h.counts), total=h.total)
    elif a.command == "hyperfinite":
        d = so.hyperfinite_decompose(g, a.K, mode=a.mode, seed=a.seed)
        run.emit(d.to_text())
        run.report.update(K=a.K, removed=len(d.removed), removed_fraction=str(d.removed_fraction))
    elif a.command == "doubling":
        res = so.doubling_maps(g, a.C, margin=a.margin)
        if isinstance(res, so.HallViolator):
            ids = [g.ids[v] for v in res.A]
            run.emit(f"violator C={a.C} A={len(res.A)} ball={len(res.neighborhood)}\n"
                     + "".join(f"a {i}\n" for i in ids))
            run.report.update(found=False, A=len(res.A), ball=len(res.neighborhood))
            raise CertificateFailure("Hall violator: no doubling maps at this scale", run.report)
        ok = so.verify_doubling(g, res)
        lines = [f"doubling C={a.C} domain={len(res.domain)} verified={ok}"]
        for x in res.domain:
            lines.append(f"map {g.ids[x]} {g.ids[res.phi1[x]]} {g.ids[res.phi2[x]]}")
        run.emit("\n".join(lines) + "\n")
        run.report.update(found=True, domain=len(res.domain), verified=ok)
        if not ok:
            raise CertificateFailure("doubling maps failed verification", run.report)
    elif a.command == "propa":
        win = [v for v in range(len(g)) if _has_ball(g, v, a.k + 1)]
        w = so.property_a_ball_witness(g, win, a.k)
        viol = w.report["violations"]
        run.emit(f"propa k={a.k} window={len(win)} max_defect2={w.report['max_defect2']!r} "
                 f"min_slack={w.report['min_slack']!r} violations={len(viol)}\n")
        run.report.update(k=a.k, window=len(win), max_defect2=w.report["max_defect2"],
                          violations=len(viol))
        if viol:
            raise CertificateFailure("ball witness exceeds the bound", run.report)


def _has_ball(g: Graph, v: int, r: int) -> bool:
    from .schreier import distances
    return all(g.is_complete(u) for u, d in distances(g, v, max_r=r - 1).items())


# kernel --------------------------------------------------------------------

def parse_kernel(spec: str, gens, run: _Run | None = None):
    """Kernel expression: ``+``-separated terms, each ``id``, ``kappa:<word>``,
    ``kappa*:<word>`` (adjoint), ``random:<width>:<seed>`` or ``file:<path>``,
    optionally prefixed by a real scalar and ``*``."""
    from . import kernels as kr
    total = None
    for term in spec.split("+"):
        term = term.strip()
        scale = None
        if "*" in term.split(":")[0] and not term.startswith("kappa*"):
            c, term = term.split("*", 1)
            scale = float(c)
        if term == "id":
            K = kr.identity_kernel(gens)
        elif term.startswith("kappa*:"):
            K = kr.kappa(gens, term[7:]).star()
        elif term.startswith("kappa:"):
            K = kr.kappa(gens, term[6:])
        elif term.startswith("random:"):
            _, w, s = term.split(":")
            K = kr.random_kernel(gens, int(w), seed=int(s))
        elif term.startswith("file:"):
            text = run.read(term[5:]) if run else Path(term[5:]).read_text()
            K = kr.kernel_from_text(text, gens)
        else:
            raise UrsLabError(f"unknown kernel term {term!r}")
        if scale is not None:
            K = kr.kernel_scale(K, scale)
        total = K if total is None else kr.kernel_add(total, K)
    if total is None:
        raise UrsLabError("empty kernel expression")
    return total


def _rows_everywhere(K, g):
    from ._util import FrontierError
    done = 0
    for x in range(len(g)):
        try:
            K.row_at(g, x)
            done += 1
        except FrontierError:
            pass
    return done


def _kernel(run: _Run):
    from . import kernels as kr
    a = run.args
    g = run.graph(a.graph)
    K = parse_kernel(a.kernel, g.gens, run)
    if a.command == "eval":
        v = kr.kernel_eval(K, g, g.index_of_id(a.x), g.index_of_id(a.y))
        run.emit(f"value {v.real!r} {v.imag!r}\n")
        run.report.update(re=v.real, im=v.imag)
    elif a.command == "mul":
        L = parse_kernel(a.other, g.gens, run)
        P = kr.kernel_mul(K, L)
        rows = _rows_everywhere(P, g)
        run.emit(kr.kernel_to_text(P))
        run.report.update(width=P.width, radius=P.radius, rows=rows, types=len(P.table))
    elif a.command == "norm":
        core = _complete_core(g, K.radius + K.width)
        est = kr.norm_estimate(K, g, [core])
        run.emit(f"norm lower={est.lower!r} upper={est.upper!r} converged={est.converged}\n")
        run.report.update(lower=est.lower, upper=est.upper, core=len(core))
    elif a.command == "trace":
        src = a.windows.strip()
        windows = json.loads(src if src.startswith("[") else run.read(a.windows))
        wins = [[g.index_of_id(int(x)) for x in w] for w in windows]
        rep = kr.amenable_trace(K, g, wins)
        lines = [f"window size={w.size} value={w.value.real!r} defect={w.defect!r} "
                 f"boundary_ratio={w.boundary_ratio!r}" for w in rep.windows]
        run.emit("\n".join(lines) + "\n")
        run.report.update(values=[w.value.real for w in rep.windows],
                          defects=[w.defect for w in rep.windows])
    elif a.command == "qr":
        Q = kr.qr_project(K, a.r)
        D = kr.diag(K)
        rows = _rows_everywhere(Q, g)
        gap = 0.0
        for x in range(len(g)):
            try:
                _, q = Q.row_at(g, x)
                _, d = D.row_at(g, x)
            except UrsLabError:
                continue
            keys = set(q) | set(d)
            gap = max([gap] + [abs(q.get(t, 0) - d.get(t, 0)) for t in keys])
        run.emit(kr.kernel_to_text(Q))
        run.report.update(r=a.r, rows=rows, gap_to_diagonal=gap)
    elif a.command == "cp":
        core = _complete_core(g, K.radius + K.width + 2 * a.k + 2)
        rep = kr.cp_approx(K, g, core, kr.ball_vectors(a.k))
        run.emit(f"cp k={a.k} core={len(core)} deviation={rep.deviation!r} "
                 f"closed_form_gap={rep.closed_form_gap!r} locality_ok={rep.locality_ok}\n")
        run.report.update(deviation=rep.deviation, closed_form_gap=rep.closed_form_gap,
                          locality_ok=rep.locality_ok)
        if not rep.locality_ok or rep.closed_form_gap > 1e-9:
            raise CertificateFailure("completely positive approximation check failed", run.report)


def _complete_core(g: Graph, r: int) -> list:
    core = [v for v in range(len(g)) if _has_ball(g, v, r)]
    if not core:
        raise UrsLabError(f"no vertex has a materialized {r}-ball; enlarge the window")
    return core


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--budget-ms", type=float, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="urslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=0, help="64-bit seed for every random stream")
    p.add_argument("--budget-ms", type=float, default=None, help="wall-clock budget")
    p.add_argument("--out", default=None, help="artifact path (default stdout)")
    groups = p.add_subparsers(dest="group", required=True)

    def sub(group, name, **kw):
        return group.add_parser(name, parents=[common], **kw)

    g = groups.add_parser("construct", help="build example graphs").add_subparsers(
        dest="command", required=True)
    c = sub(g, "cycle")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--involutions", action="store_true")
    c = sub(g, "grid")
    c.add_argument("--w", type=int, required=True)
    c.add_argument("--h", type=int, required=True)
    c.add_argument("--product-coloring", action="store_true",
                   help="relabel by the product of a nonrepetitive coloring and the edge coloring")
    c.add_argument("--alphabet", type=int, default=16)
    c.add_argument("--nmax", type=int, default=4)
    c = sub(g, "tree")
    c.add_argument("--d", type=int, default=3)
    c.add_argument("--depth", type=int, required=True)
    c = sub(g, "involution")
    c.add_argument("--edges", required=True, help="'n <count>' then '<u> <v> <color>' lines")
    c.add_argument("--open", default="", help="comma-separated frontier vertices")
    c.add_argument("--product-coloring", action="store_true")
    c.add_argument("--alphabet", type=int, default=16)
    c.add_argument("--nmax", type=int, default=4)
    c = sub(g, "tower")
    c.add_argument("--kind", choices=["cycle", "voltage"], default="cycle")
    c.add_argument("--levels", type=int, required=True)
    c.add_argument("--base-length", type=int, default=4)
    c.add_argument("--base", help="base graph file (voltage towers)")
    c.add_argument("--base-size", type=int, default=4)
    c = sub(g, "nonexact")
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--base-size", type=int, default=None)
    c.add_argument("--girth", type=int, default=5)

    g = groups.add_parser("color", help="nonrepetitive colorings").add_subparsers(
        dest="command", required=True)
    c = sub(g, "nonrep")
    c.add_argument("--graph", required=True)
    c.add_argument("--alphabet", type=int, required=True)
    c.add_argument("--nmax", type=int, required=True)
    c.add_argument("--max-resamples", type=int, default=100_000)
    c.add_argument("--method", choices=["resample", "backtrack"], default="resample")
    c = sub(g, "verify")
    c.add_argument("--graph", required=True)
    c.add_argument("--coloring", required=True)
    c.add_argument("--nmax", type=int, required=True)

    g = groups.add_parser("urs", help="window certificates").add_subparsers(
        dest="command", required=True)
    c = sub(g, "genericity")
    c.add_argument("--graph", required=True)
    c.add_argument("--R", type=int, required=True)
    c.add_argument("--Smax", type=int, required=True)
    c = sub(g, "classes")
    c.add_argument("--graph", required=True)
    c.add_argument("--r", type=int, required=True)
    c = sub(g, "repetition")
    c.add_argument("--graph", required=True)
    c.add_argument("--x", type=int, required=True, help="vertex id")
    c.add_argument("--R", type=int, required=True)

    g = groups.add_parser("sofic", help="sofic and measure tools").add_subparsers(
        dest="command", required=True)
    c = sub(g, "complete")
    c.add_argument("--graph", required=True)
    c = sub(g, "bs")
    c.add_argument("--graph", required=True)
    c.add_argument("--r", type=int, required=True)
    c = sub(g, "hyperfinite")
    c.add_argument("--graph", required=True)
    c.add_argument("--K", type=int, required=True)
    c.add_argument("--mode", choices=["heuristic", "exact"], default="heuristic")
    c = sub(g, "doubling")
    c.add_argument("--graph", required=True)
    c.add_argument("--C", type=int, required=True)
    c.add_argument("--margin", type=int, default=None)
    c = sub(g, "propa")
    c.add_argument("--graph", required=True)
    c.add_argument("--k", type=int, required=True)

    g = groups.add_parser("kernel", help="local kernels").add_subparsers(
        dest="command", required=True)
    for name in ("eval", "mul", "norm", "trace", "qr", "cp"):
        c = sub(g, name)
        c.add_argument("--graph", required=True)
        c.add_argument("--kernel", default="id",
                       help="e.g. 'kappa:s+kappa*:s', 'random:2:7', 'file:k.txt'")
        if name == "eval":
            c.add_argument("--x", type=int, required=True)
            c.add_argument("--y", type=int, required=True)
        elif name == "mul":
            c.add_argument("--other", required=True)
        elif name == "trace":
            c.add_argument("--windows", required=True, help="JSON list of vertex-id lists, inline or a file path")
        elif name == "qr":
            c.add_argument("--r", type=int, required=True)
        elif name == "cp":
            c.add_argument("--k", type=int, default=1)
    return p


_DISPATCH = {"construct": _construct, "color": _color, "urs": _urs, "sofic": _sofic,
             "kernel": _kernel}


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    r = _Run(args)
    t0 = time.perf_counter()
    code = EXIT_OK
    status = "ok"
    try:
        _DISPATCH[args.group](r)
    except CertificateFailure as exc:
        code, status = EXIT_CERT, f"certificate failure: {exc}"
    except BudgetExceeded as exc:
        code, status = EXIT_BUDGET, f"budget exhausted: {exc}"
    except (UrsLabError, OSError, ValueError) as exc:
        code, status = EXIT_USAGE, f"error: {exc}"
    manifest = {
        "subcommand": f"{args.group} {args.command}",
        "params": _params(args),
        "seed": args.seed,
        "inputs": r.inputs,
        "outputs": r.outputs,
        "wall_clock_s": round(time.perf_counter() - t0, 6),
        "version": __version__,
        "exit_code": code,
    }
    # keep stdout clean for the artifact when it is written there
    rep = sys.stdout if args.out else sys.stderr
    for line in r.lines:
        print(line, file=rep)
    print(f"{args.group} {args.command}: {status}", file=rep)
    print("--- report ---", file=rep)
    print(json.dumps(r.report, sort_keys=True, default=str), file=rep)
    text = json.dumps(manifest, sort_keys=True, indent=1, default=str) + "\n"
    if args.out:
        Path(str(args.out) + ".manifest.json").write_text(text)
    else:
        sys.stderr.write(json.dumps(manifest, sort_keys=True, default=str) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
