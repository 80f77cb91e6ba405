"""One-step rewriting from zero steps, and ordinal-annotated reduction witnesses.

A witness of ``s ->>_g t`` is a derivation tree over two rule families:

* ``split[g: steps | steps | ... ]`` with ``m`` segment hats and a final hat
  as premisses.  Its ``m + 1`` step lists are the finite reductions between
  the hats; every segment hat carries an ordinal below ``g`` and the final
  hat carries ``g`` itself.  All premisses are inductive.
* ``lift[g: r]`` over one full witness per premiss of the object rule ``r``,
  with the premiss flags of ``r``.

The statement of each witness node is the statement of the object trees it
relates, so witness trees reuse all of the core machinery.  The source of a
witness is kept outside of it (``Witness`` pairs them); sources of inner
nodes are recomputed by replaying steps, targets are read off the lifts.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

from .core import (
    GRAPH_LIMIT,
    Node,
    Rule,
    Thunk,
    deep,
    resolve,
    state_graph,
    truncate,
)
from .errors import (
    BadPath,
    EndpointMismatch,
    InfrewError,
    NonProductive,
    NotRegular,
    OrdinalNotLarger,
    ShapeMismatch,
    StepNotApplicable,
)
from .ordinal import ZERO, Ordinal, ord_max_succ, parse_ordinal
from .syntax import Language, Scanner, parse_tree, print_tree


# ---------------------------------------------------------------------------
# steps


@dataclass(frozen=True)
class Step:
    """A zero step ``name`` applied at ``path`` (1-based premiss indices)."""

    path: tuple
    name: str
    depth: int | None = field(default=None, compare=False)

    def lifted(self, i, flag):
        d = None if self.depth is None else self.depth + flag
        return Step((i,) + tuple(self.path), self.name, d)

    def text(self):
        return f"{self.name}@{'.'.join(map(str, self.path))}"

    def __str__(self):
        return self.text()


_STEP = re.compile(r"^(.+)@((?:\d+(?:\.\d+)*)?)$")


def parse_step(text):
    m = _STEP.match(text.strip())
    if not m:
        raise ValueError(f"bad step {text!r}, expected name@path")
    path = tuple(int(x) for x in m.group(2).split(".")) if m.group(2) else ()
    if any(i < 1 for i in path):
        raise ValueError(f"bad step {text!r}, paths are 1-based")
    return Step(path, m.group(1))


def split_top(text, sep):
    """Split on ``sep`` (a char or None for whitespace) outside brackets."""
    out, buf, depth = [], [], 0
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if depth == 0 and (ch == sep or (sep is None and ch.isspace())):
            out.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    out.append("".join(buf))
    return out if sep is not None else [x for x in out if x]


def parse_steps(text):
    return tuple(parse_step(x) for x in split_top(text, None))


class System:
    """A rewriting system given by its zero steps (root rewrite steps).

    Instances provide ``lang`` and ``enumerate``; ``apply`` defaults to a
    lookup in ``enumerate``.  ``root_rewrite(t, name)`` returns a pair
    ``(p, q)`` of a linear pattern and a template such that ``t = p(ts)``
    and the step produces ``q(ts)``; it powers the generic preponement
    step of the compression engine.  ``q_step`` may be overridden when a
    root step is not of that shape.
    """

    lang: Language = None

    def enumerate(self, t):
        raise NotImplementedError

    def apply(self, name, t):
        for n, result in self.enumerate(t):
            if n == name:
                return result
        raise StepNotApplicable(f"step {name} does not apply at the root of this tree")

    def root_rewrite(self, t, name):
        raise NotImplementedError

    q_step = None


def apply_step(t, st, system):
    """Rewrite ``t`` at ``st.path``; returns ``(result, recomputed step)``."""
    spine = []
    cur = t
    depth = 0
    for i in st.path:
        n = resolve(cur)
        if not 1 <= i <= len(n.children):
            raise BadPath(f"no premiss {i} below {n.rule.text()} in step {st.text()}")
        spine.append((n, i))
        depth += n.rule.coind[i - 1]
        cur = n.children[i - 1]
    out = system.apply(st.name, resolve(cur))
    for n, i in reversed(spine):
        kids = list(n.children)
        kids[i - 1] = out
        out = Node(n.rule, kids)
    if st.depth is not None and st.depth != depth:
        raise StepNotApplicable(f"step {st.text()} claims depth {st.depth}, found {depth}")
    return out, Step(st.path, st.name, depth)


def replay(t, steps, system):
    """Apply ``steps`` in order; returns the final tree and the steps with
    their depths filled in."""
    done = []
    for st in steps:
        t, st = apply_step(t, st, system)
        done.append(st)
    return t, done


def positions(t, limit=10_000):
    """Paths of ``t`` in breadth-first (outermost, then leftmost) order."""
    queue = deque([((), t)])
    seen = 0
    while queue and seen < limit:
        path, u = queue.popleft()
        seen += 1
        n = resolve(u)
        yield path, n
        for i, c in enumerate(n.children, 1):
            queue.append((path + (i,), c))


def positions_preorder(t, limit=10_000):
    """Paths of ``t`` in lexicographic order (normal order for terms).

    On an infinite leftmost branch this only sees the first ``limit``
    positions, so ``positions`` is the safer default.
    """
    stack = [((), t)]
    seen = 0
    while stack and seen < limit:
        path, u = stack.pop()
        seen += 1
        n = resolve(u)
        yield path, n
        for i in range(len(n.children), 0, -1):
            stack.append((path + (i,), n.children[i - 1]))


STRATEGIES = {"outermost": positions, "leftmost": positions_preorder}


@deep
def reduce(t, system, fuel, limit=10_000, strategy="outermost"):
    """Reduce for at most ``fuel`` steps, always at the first redex found.

    ``outermost`` scans breadth-first, so a redex nearest to the root is
    taken, leftmost among those; ``leftmost`` scans paths in
    lexicographic order (normal order).
    """
    walk = STRATEGIES[strategy]
    trace = []
    for _ in range(fuel):
        for path, n in walk(t, limit):
            found = system.enumerate(n)
            if found:
                t, st = apply_step(t, Step(path, found[0][0]), system)
                trace.append(st)
                break
        else:
            break
    return t, trace


# ---------------------------------------------------------------------------
# witness rules


@dataclass(frozen=True)
class SplitRule(Rule):
    gamma: Ordinal
    pres: tuple  # m + 1 tuples of Step
    name = "split"

    @property
    def coind(self):
        return (0,) * len(self.pres)

    @property
    def m(self):
        return len(self.pres) - 1

    def conclude(self, premisses):
        return premisses[-1]

    def params_text(self):
        body = " | ".join(" ".join(st.text() for st in seg) for seg in self.pres)
        return f"{self.gamma}: {body}" if body.strip(" |") or len(self.pres) > 1 else f"{self.gamma}:"


@dataclass(frozen=True)
class LiftRule(Rule):
    gamma: Ordinal
    rule: Rule
    name = "lift"

    @property
    def coind(self):
        return self.rule.coind

    def conclude(self, premisses):
        return self.rule.conclude(premisses)

    def params_text(self):
        return f"{self.gamma}: {self.rule.text()}"


def is_split(n):
    return isinstance(n, Node) and isinstance(n.rule, SplitRule)


def is_lift(n):
    return isinstance(n, Node) and isinstance(n.rule, LiftRule)


def gamma_of(w):
    return resolve(w).rule.gamma


def split_node(gamma, pres, hats, final):
    pres = tuple(tuple(p) for p in pres)
    return Node(SplitRule(Ordinal.of(gamma), pres), list(hats) + [final])


def lift_node(gamma, rule, kids):
    return Node(LiftRule(Ordinal.of(gamma), rule), kids)


def split_parts(w):
    """``(gamma, pres, hats, final)`` of a split node."""
    n = resolve(w)
    if not is_split(n):
        raise ShapeMismatch(f"expected a split, found {n.rule.text()}")
    return n.rule.gamma, n.rule.pres, n.children[:-1], n.children[-1]


def lift_parts(w):
    n = resolve(w)
    if not is_lift(n):
        raise ShapeMismatch(f"expected a lift, found {n.rule.text()}")
    return n.rule.gamma, n.rule.rule, n.children


@dataclass(frozen=True)
class Witness:
    """A witness tree together with the source tree it starts from."""

    source: object
    proof: object

    @property
    def gamma(self):
        return gamma_of(self.proof)

    def target(self):
        return target(self.proof)


# ---------------------------------------------------------------------------
# text format


class WitnessLanguage(Language):
    """``split[g: steps | ...](hats..., final)`` and ``lift[g: r](...)``."""

    check_guards = False

    def __init__(self, object_lang):
        self.object_lang = object_lang
        self.default_statement = object_lang.default_statement

    def make_rule(self, name, params, nargs):
        if params is None or ":" not in params:
            raise ValueError(f"{name} needs parameters '[ordinal: ...]'")
        head, _, rest = params.partition(":")
        gamma = parse_ordinal(head)
        if name == "split":
            pres = tuple(parse_steps(seg) for seg in split_top(rest, "|"))
            if len(pres) != nargs:
                raise ValueError(f"split with {len(pres)} step lists needs {len(pres)} premisses, got {nargs}")
            return SplitRule(gamma, pres)
        if name == "lift":
            sc = Scanner(rest)
            rname = sc.ident()
            rparams = sc.balanced("[", "]") if sc.peek() == "[" else None
            if not sc.at_end():
                raise ValueError(f"unexpected text after lifted rule in {params!r}")
            return LiftRule(gamma, self.object_lang.make_rule(rname, rparams, nargs))
        raise ValueError(f"unknown witness rule {name!r}")

    def parse_statement(self, text):
        return self.object_lang.parse_statement(text)

    def format_statement(self, s):
        return self.object_lang.format_statement(s)


def parse_witness(text, object_lang):
    return parse_tree(text, WitnessLanguage(object_lang))


def print_witness(w, object_lang):
    return print_tree(w, WitnessLanguage(object_lang))


def parse_witness_file(text, object_lang):
    """``source: <tree>`` followed by ``witness: <tree>``."""
    m = re.search(r"^\s*source\s*:(.*?)^\s*witness\s*:(.*)\Z", text, re.S | re.M)
    if not m:
        raise ValueError("expected 'source:' and 'witness:' sections")
    src = parse_tree(m.group(1), object_lang)
    proof = parse_witness(m.group(2), object_lang)
    return Witness(src, proof)


def print_witness_file(w, object_lang):
    return f"source: {print_tree(w.source, object_lang)}\nwitness: {print_witness(w.proof, object_lang)}\n"


# ---------------------------------------------------------------------------
# endpoints


def target_node(w):
    """Root node of the target of witness ``w`` (lazy below the root)."""
    n = resolve(w)
    if is_split(n):
        return n.memo("target", lambda: target_node(n.children[-1]))
    if not is_lift(n):
        raise ShapeMismatch(f"not a witness node: {n.rule.text()}")
    return n.memo("target", lambda: Node(n.rule.rule, [_lazy_target(c) for c in n.children]))


def _lazy_target(c):
    return Thunk(c.conclusion, lambda: target_node(c))


def target(w):
    return _lazy_target(w)


def target_truncation(w, d, budget=GRAPH_LIMIT):
    """Truncation of the target at depth ``d``, read off the final lifts."""
    return truncate(target(w), d, budget)


def sources_of_split(w, src, system):
    """Sources of each hat of a split (segments, then the final hat).

    Also returns the replayed step lists with their depths.
    """
    gamma, pres, hats, final = split_parts(w)
    out, done = [], []
    cur = src
    for i, hat in enumerate(list(hats) + [final]):
        cur, sts = replay(cur, pres[i], system)
        done.append(sts)
        out.append(cur)
        if i < len(hats):
            cur = target(hat)
    return out, done


# ---------------------------------------------------------------------------
# the basic lemmas


def refl_hat(t, gamma=ZERO):
    """Reflexive hat witness ``t ->>^_g t``, lazily following ``t``."""
    gamma = Ordinal.of(gamma)
    n = resolve(t)
    return n.memo(("refl", gamma), lambda: Thunk(n.conclusion, lambda: _refl_node(n, gamma)))


def _refl_node(n, gamma):
    kids = [split_node(gamma, ((),), [], refl_hat(c, gamma)) for c in n.children]
    return lift_node(gamma, n.rule, kids)


def refl_witness(t, gamma=ZERO):
    return hat_to_full(refl_hat(t, gamma))


def hat_to_full(h):
    """A hat seen as a full witness: a split with no steps and no segments."""
    return split_node(gamma_of(h), ((),), [], h)


def weaken_witness(w, delta):
    """Raise the ordinal of ``w`` to ``delta`` (lazily, on the whole spine)."""
    delta = Ordinal.of(delta)
    n = resolve(w)
    g = n.rule.gamma
    if delta < g:
        raise OrdinalNotLarger(f"cannot lower {g} to {delta}")
    if delta == g:
        return n
    return n.memo(("weaken", delta), lambda: Thunk(n.conclusion, lambda: _weaken_node(n, delta)))


def _weaken_node(n, delta):
    if is_split(n):
        return Node(SplitRule(delta, n.rule.pres), list(n.children[:-1]) + [weaken_witness(n.children[-1], delta)])
    if is_lift(n):
        return Node(LiftRule(delta, n.rule.rule), [weaken_witness(c, delta) for c in n.children])
    raise ShapeMismatch(f"not a witness node: {n.rule.text()}")


def concat_hat(w1, w2):
    """Hats ``s ->>^_g t`` and ``t ->>^_d u`` give ``s ->>^_e u``,
    ``e = max(g + 1, d)``: the first hat's sub-witnesses become segments."""
    g, r1, kids1 = lift_parts(w1)
    d, r2, kids2 = lift_parts(w2)
    if r1 != r2:
        raise EndpointMismatch(f"hats meet at {r1.text()} and {r2.text()}")
    e = ord_max_succ(g, d)
    kids = []
    for a, b in zip(kids1, kids2):
        _, pa, ha, fa = split_parts(a)
        _, pb, hb, fb = split_parts(b)
        kids.append(split_node(e, pa + pb, list(ha) + [fa] + list(hb), weaken_witness(fb, e)))
    return lift_node(e, r1, kids)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    tag: str
    message: str

    def __str__(self):
        return f"{self.tag}: {self.message}"


def _shape_violations(n):
    """Ordinal side conditions at one witness node."""
    out = []
    if is_split(n):
        g = n.rule.gamma
        for i, h in enumerate(n.children):
            h = resolve(h)
            last = i == len(n.children) - 1
            if not is_lift(h):
                out.append(Violation("malformed", f"premiss {i + 1} of a split is not a lift"))
            elif last and h.rule.gamma != g:
                out.append(Violation("ordinal-violation", f"final lift at {h.rule.gamma} under a split at {g}"))
            elif not last and not h.rule.gamma < g:
                out.append(Violation("ordinal-violation", f"segment ordinal {h.rule.gamma} is not below {g}"))
    elif is_lift(n):
        g = n.rule.gamma
        for i, c in enumerate(n.children):
            c = resolve(c)
            if not is_split(c):
                out.append(Violation("malformed", f"premiss {i + 1} of a lift is not a split"))
            elif c.rule.gamma != g:
                out.append(Violation("ordinal-violation", f"split at {c.rule.gamma} under a lift at {g}"))
    else:
        out.append(Violation("malformed", f"{n.rule.text()} is not a witness rule"))
    return out


def _inductive_cycle(nodes):
    index = {id(n): i for i, n in enumerate(nodes)}

    def succ(n):
        flags = n.rule.coind
        return [index[id(resolve(c))] for f, c in zip(flags, n.children) if not f]

    colour = [0] * len(nodes)
    for s in range(len(nodes)):
        if colour[s]:
            continue
        colour[s] = 1
        stack = [(s, iter(succ(nodes[s])))]
        while stack:
            i, it = stack[-1]
            j = next(it, None)
            if j is None:
                colour[i] = 2
                stack.pop()
            elif colour[j] == 1:
                return True
            elif colour[j] == 0:
                colour[j] = 1
                stack.append((j, iter(succ(nodes[j]))))
    return False


@deep
def validate_witness(w, source, system, depth_budget=8, limit=20_000):
    """Violations of a witness from ``source``; an empty list means valid.

    Regular (thunk-free) witnesses get an exhaustive check of ordinals and
    guardedness on their state graph.  Endpoints are checked by replaying
    steps from the source down to ``depth_budget`` coinductive lifts.
    """
    found = []
    seen_msgs = set()

    def report(v):
        if (v.tag, v.message) not in seen_msgs:
            seen_msgs.add((v.tag, v.message))
            found.append(v)

    try:
        nodes = state_graph(w, limit, strict=True)
    except NotRegular:
        nodes = None
    except NonProductive as e:
        report(Violation("unguarded-cycle", str(e)))
        return found
    if nodes is not None:
        for n in nodes:
            for v in _shape_violations(n):
                report(v)
        if _inductive_cycle(nodes):
            report(Violation("unguarded-cycle", "a witness cycle crosses only inductive premisses"))
            return found

    visited = set()
    alive = []
    on_path = set()
    count = [0]

    def go(w, src, budget):
        n = resolve(w)
        s = resolve(src)
        key = (id(n), budget)
        if key in on_path:
            report(Violation("unguarded-cycle", "a witness cycle crosses only inductive premisses"))
            return
        vkey = (id(n), id(s), budget)
        if vkey in visited:
            return
        count[0] += 1
        if count[0] > limit:
            raise NonProductive("validation budget exhausted")
        visited.add(vkey)
        alive.append((n, s))  # ids in ``visited`` must stay unique
        on_path.add(key)
        try:
            if nodes is None:
                for v in _shape_violations(n):
                    report(v)
            if is_split(n):
                cur = s
                hats = n.children
                for i, seg in enumerate(n.rule.pres):
                    try:
                        cur, _ = replay(cur, seg, system)
                    except (StepNotApplicable, BadPath) as e:
                        report(Violation("step-not-applicable", str(e)))
                        return
                    if i < len(hats):
                        go(hats[i], cur, budget)
                        if i < len(hats) - 1:
                            cur = target(hats[i])
            elif is_lift(n):
                r = n.rule.rule
                if s.rule != r or len(s.children) != len(n.children):
                    report(
                        Violation(
                            "endpoint-mismatch",
                            f"lift of {r.text()} over a source rooted at {s.rule.text()}",
                        )
                    )
                    return
                for f, c, sc in zip(r.coind, n.children, s.children):
                    if f and budget <= 0:
                        continue
                    go(c, sc, budget - f)
        finally:
            on_path.discard(key)

    try:
        go(w, source, depth_budget)
    except NonProductive as e:
        report(Violation("unguarded-cycle", str(e)))
    except InfrewError as e:
        report(Violation("malformed", str(e)))
    return found

