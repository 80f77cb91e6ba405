"""Command-line front end.

Exit codes: 0 success, 1 other errors, 2 parse errors, 3 non-productive
input, 4 witness or multicut violations, 5 stuck cut elimination.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from .compress import Engine
from .core import Trunc, state_graph, tree_distance, truncate
from .errors import InfrewError, NonProductive, StepNotApplicable, TreeSyntaxError
from .fo import parse_trs
from .lam import Flags, LambdaSystem, format_lambda, parse_lambda
from .mumall import (
    MumallSystem,
    StuckReport,
    applicable_root_steps,
    check_proof,
    cut_elim_observe,
    parse_proof,
)
from .rewrite import (
    Step,
    apply_step,
    parse_step,
    parse_witness_file,
    positions,
    print_witness,
    reduce,
    validate_witness,
)
from .syntax import parse_tree, print_tree

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_NONPRODUCTIVE, EXIT_VIOLATIONS, EXIT_STUCK = 0, 1, 2, 3, 4, 5


class ParseFailure(Exception):
    pass


class Result:
    """What one command run prints, in text or JSON form."""

    def __init__(self, code=EXIT_OK):
        self.code = code
        self.lines = []
        self.data = {}

    def line(self, text):
        self.lines.append(text)

    def render(self, fmt):
        if fmt == "json":
            return json.dumps(self.data, sort_keys=True)
        return "\n".join(self.lines)


def _read(path):
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise ParseFailure(f"cannot read {path}: {e.strerror}") from None


def load_system(name):
    """``FILE.trs``, ``lam`` or ``lam:abc``, or ``mumall``."""
    if name is None:
        raise ParseFailure("a system is required (--system FILE.trs | lam[:abc] | mumall)")
    if name == "mumall":
        return MumallSystem()
    if name == "lam" or name.startswith("lam:"):
        try:
            return LambdaSystem(Flags.parse(name[4:]) if ":" in name else Flags())
        except ValueError as e:
            raise ParseFailure(str(e)) from None
    try:
        return parse_trs(_read(name))
    except (ValueError, InfrewError) as e:
        if isinstance(e, ParseFailure):
            raise
        raise ParseFailure(f"{name}: {e}") from None


def _parse(system, path):
    text = _read(path)
    try:
        if isinstance(system, LambdaSystem):
            return parse_lambda(text, None if text.lstrip().startswith("flags") else system.flags)
        return system.parse(text)
    except (ValueError, InfrewError) as e:
        raise ParseFailure(f"{path}: {e}") from None


def _witness(system, path):
    try:
        return parse_witness_file(_read(path), system.lang)
    except (ValueError, InfrewError) as e:
        if isinstance(e, ParseFailure):
            raise
        raise ParseFailure(f"{path}: {e}") from None


def show(system, t):
    if isinstance(system, LambdaSystem) and not _has_trunc(t):
        return format_lambda(t)
    return print_tree(t, system.lang if system is not None else None)


def _has_trunc(t):
    try:
        return any(isinstance(n.rule, Trunc) for n in state_graph(t, 10_000))
    except InfrewError:
        return True


def _step_lines(res, steps):
    res.data["steps"] = [st.text() for st in steps]
    for st in steps:
        res.line(f"{st.text()} (depth {st.depth})")


# ---------------------------------------------------------------------------
# commands; each returns a Result


def cmd_truncate(args, path):
    system = load_system(args.system) if args.system else None
    if system is None:
        try:
            t = parse_tree(_read(path))
        except (ValueError, InfrewError) as e:
            raise ParseFailure(f"{path}: {e}") from None
    else:
        t = _parse(system, path)
    res = Result()
    text = show(system, truncate(t, args.depth))
    res.data["truncation"] = text
    res.line(text)
    return res


def cmd_distance(args):
    system = load_system(args.system) if args.system else None
    trees = []
    for path in (args.left, args.right):
        if system is None:
            try:
                trees.append(parse_tree(_read(path)))
            except (ValueError, InfrewError) as e:
                raise ParseFailure(f"{path}: {e}") from None
        else:
            trees.append(_parse(system, path))
    d = tree_distance(trees[0], trees[1], args.depth)
    res = Result()
    res.data["distance"] = str(d.value)
    res.data["exact"] = d.exact
    res.line(str(d))
    return res


def cmd_step(args):
    system = load_system(args.system)
    t = _parse(system, args.file)
    res = Result()
    if args.apply:
        try:
            out, st = apply_step(t, parse_step(args.apply), system)
        except ValueError as e:
            raise ParseFailure(str(e)) from None
        _step_lines(res, [st])
        text = show(system, truncate(out, args.depth))
        res.data["truncation"] = text
        res.line(text)
        return res
    found = []
    for path, n in positions(t, args.fuel):
        for name, _ in system.enumerate(n):
            found.append(Step(path, name, None).text())
    res.data["steps"] = found
    for s in found:
        res.line(s)
    return res


def cmd_reduce(args, path):
    system = load_system(args.system)
    t = _parse(system, path)
    end, trace = reduce(t, system, args.fuel)
    res = Result()
    _step_lines(res, trace)
    text = show(system, truncate(end, args.depth))
    res.data["truncation"] = text
    res.line(f"truncation: {text}")
    return res


def _violations(res, found):
    res.data["violations"] = [{"tag": v.tag, "message": v.message} for v in found]
    for v in found:
        res.line(f"violation {v}")
    if found:
        res.code = EXIT_VIOLATIONS


def cmd_witness_validate(args):
    system = load_system(args.system)
    w = _witness(system, args.file)
    res = Result()
    _violations(res, validate_witness(w.proof, w.source, system, args.depth))
    if not res.code:
        res.line("valid")
    return res


def cmd_compress(args):
    system = load_system(args.system)
    w = _witness(system, args.file)
    res = Result()
    _violations(res, validate_witness(w.proof, w.source, system, args.depth))
    if res.code:
        return res
    engine = Engine(system)
    cw = engine.compress(w.proof, w.source)
    steps, cert = engine.observe_omega(cw, w.source, args.depth, args.fuel)
    _step_lines(res, steps)
    text = show(system, cert)
    res.data["truncation"] = text
    res.line(f"certificate: {text}")
    if args.print_witness:
        res.data["witness"] = print_witness(truncate(cw, args.depth), system.lang)
        res.line(f"witness: {res.data['witness']}")
    return res


def cmd_observe(args):
    system = load_system(args.system)
    w = _witness(system, args.file)
    steps, cert = Engine(system).observe_omega(w.proof, w.source, args.depth, args.fuel)
    res = Result()
    _step_lines(res, steps)
    text = show(system, cert)
    res.data["truncation"] = text
    res.line(f"certificate: {text}")
    return res


def cmd_fo(args, path=None):
    if args.fo_cmd == "check":
        system = load_system(args.system_file)
        res = Result()
        sig = system.sig
        res.data["signature"] = dict(sorted(sig.arities.items()))
        res.data["rules"] = [f"{r.name}: {print_tree(r.lhs, system.lang)} -> {print_tree(r.rhs, system.lang)}" for r in system.rules]
        res.line("sig " + " ".join(f"{f}/{k}" for f, k in sorted(sig.arities.items())))
        if sig.inductive:
            res.line("inductive " + " ".join(f"{f}.{i}" for f, i in sorted(sig.inductive)))
        for r in res.data["rules"]:
            res.line(r)
        res.line("left-linear")
        return res
    args.system = args.system_file
    return cmd_reduce(args, path)


def cmd_lam(args, path):
    system = load_system("lam:" + args.flags if args.flags else "lam")
    t = _parse(system, path)
    res = Result()
    if args.lam_cmd == "print":
        text = format_lambda(t)
        res.data["term"] = text
        res.line(text)
        return res
    end, trace = reduce(t, system, args.fuel, strategy="leftmost")
    _step_lines(res, trace)
    text = show(system, truncate(end, args.depth))
    res.data["truncation"] = text
    res.line(f"truncation: {text}")
    return res


def cmd_mumall(args, path):
    system = MumallSystem()
    res = Result()
    if args.mumall_cmd == "check":
        try:
            t = parse_proof(_read(path), checked=False)
        except (ValueError, InfrewError) as e:
            if isinstance(e, ParseFailure):
                raise
            raise ParseFailure(f"{path}: {e}") from None
        found = check_proof(t)
        res.data["conclusion"] = str(t.conclusion)
        res.data["violations"] = [{"tag": v.tag, "message": v.message, "rule": r} for r, v in found]
        res.line(f"conclusion: {t.conclusion}")
        for r, v in found:
            res.line(f"violation {v} (at {r})")
        if found:
            res.code = EXIT_VIOLATIONS
        else:
            res.line("well-formed")
        return res
    t = _parse(system, path)
    if args.mumall_cmd == "step":
        if args.apply:
            try:
                out, st = apply_step(t, parse_step(args.apply), system)
            except ValueError as e:
                raise ParseFailure(str(e)) from None
            _step_lines(res, [st])
            text = show(system, truncate(out, args.depth))
            res.data["truncation"] = text
            res.line(text)
            return res
        names = [st.name for st in applicable_root_steps(t)]
        res.data["steps"] = names
        for n in names:
            res.line(n)
        return res
    steps, out = cut_elim_observe(t, args.depth, args.fuel)
    _step_lines(res, steps)
    if isinstance(out, StuckReport):
        res.code = EXIT_STUCK
        res.data["stuck"] = out.reason
        res.data["truncation"] = show(system, out.truncation)
        res.line(f"stuck: {out.reason}")
        res.line(f"truncation: {res.data['truncation']}")
        return res
    text = show(system, out)
    res.data["truncation"] = text
    res.line(f"truncation: {text}")
    return res


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _common(p, files=False):
    p.add_argument("--depth", type=int, default=8, help="observation depth (default 8)")
    p.add_argument("--fuel", type=int, default=10_000, help="step budget (default 10000)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    if files:
        p.add_argument("--jobs", type=int, default=1, help="process input files concurrently")


def build_parser():
    ap = argparse.ArgumentParser(prog="infrew", description="Coinductive infinitary rewriting.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("truncate", help="print the depth-d truncation of trees")
    p.add_argument("files", nargs="+")
    p.add_argument("--system")
    _common(p, True)

    p = sub.add_parser("distance", help="distance between two trees")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--system")
    _common(p)

    p = sub.add_parser("step", help="list or apply single steps")
    p.add_argument("file")
    p.add_argument("--system", required=True)
    p.add_argument("--apply", help="a step name@path")
    _common(p)

    p = sub.add_parser("reduce", help="leftmost-outermost reduction")
    p.add_argument("files", nargs="+")
    p.add_argument("--system", required=True)
    _common(p, True)

    for name, helptext in (
        ("witness-validate", "check a witness file"),
        ("compress", "compress a witness and observe the result"),
        ("observe", "observe an omega-witness"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file")
        p.add_argument("--system", required=True)
        if name == "compress":
            p.add_argument("--print-witness", action="store_true")
        _common(p)

    p = sub.add_parser("fo", help="first-order systems")
    fo = p.add_subparsers(dest="fo_cmd", required=True)
    q = fo.add_parser("check", help="parse a .trs file and print it")
    q.add_argument("system_file")
    _common(q)
    q = fo.add_parser("reduce", help="reduce terms with a .trs file")
    q.add_argument("system_file")
    q.add_argument("files", nargs="+")
    _common(q, True)

    p = sub.add_parser("lam", help="lambda calculi")
    lam = p.add_subparsers(dest="lam_cmd", required=True)
    for name in ("print", "normalize"):
        q = lam.add_parser(name)
        q.add_argument("files", nargs="+")
        q.add_argument("--flags", help="coinductive flags abc (default from the file, else 001)")
        _common(q, True)

    p = sub.add_parser("mumall", help="mu-MALL pre-proofs")
    mm = p.add_subparsers(dest="mumall_cmd", required=True)
    for name in ("check", "step", "elim"):
        q = mm.add_parser(name)
        q.add_argument("files", nargs="+")
        if name == "step":
            q.add_argument("--apply", help="a root step name@path")
        _common(q, True)
    return ap


def _run(fn, *a):
    try:
        return fn(*a)
    except ParseFailure as e:
        res = Result(EXIT_PARSE)
        res.data["error"] = str(e)
        res.line(f"parse error: {e}")
        return res
    except TreeSyntaxError as e:
        res = Result(EXIT_PARSE)
        res.data["error"] = str(e)
        res.line(f"parse error: {e}")
        return res
    except NonProductive as e:
        res = Result(EXIT_NONPRODUCTIVE)
        res.data["error"] = str(e)
        res.line(f"non-productive: {e}")
        return res
    except StepNotApplicable as e:
        res = Result(EXIT_ERROR)
        res.data["error"] = str(e)
        res.line(f"error: {e}")
        return res
    except InfrewError as e:
        res = Result(EXIT_ERROR)
        res.data["error"] = f"{type(e).__name__}: {e}"
        res.line(f"error: {type(e).__name__}: {e}")
        return res


def _for_files(args, fn):
    files = args.files
    jobs = max(1, getattr(args, "jobs", 1))
    if jobs == 1 or len(files) == 1:
        results = [_run(fn, args, f) for f in files]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda f: _run(fn, args, f), files))
    if len(files) == 1:
        return results[0]
    out = Result(max(r.code for r in results))
    out.data = {"results": [dict(r.data, file=f) for f, r in zip(files, results)]}
    for f, r in zip(files, results):
        out.line(f"== {f}")
        out.lines.extend(r.lines)
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.depth < 0 or args.fuel < 0:
        print("error: --depth and --fuel must be non-negative", file=sys.stderr)
        return EXIT_ERROR
    cmd = args.cmd
    if cmd == "truncate":
        res = _for_files(args, cmd_truncate)
    elif cmd == "reduce":
        res = _for_files(args, cmd_reduce)
    elif cmd == "fo":
        res = _run(cmd_fo, args) if args.fo_cmd == "check" else _for_files(args, cmd_fo)
    elif cmd == "lam":
        res = _for_files(args, cmd_lam)
    elif cmd == "mumall":
        res = _for_files(args, cmd_mumall)
    else:
        fn = {
            "distance": cmd_distance,
            "step": cmd_step,
            "witness-validate": cmd_witness_validate,
            "compress": cmd_compress,
            "observe": cmd_observe,
        }[cmd]
        res = _run(fn, args)
    print(res.render(args.format))
    return res.code


if __name__ == "__main__":
    sys.exit(main())
