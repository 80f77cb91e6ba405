"""Infinitary lambda calculi with coinductive flags ``abc``.

Terms are trees over ``lam`` (one premiss, flag ``a``), ``app`` (function
flag ``b``, argument flag ``c``), bound occurrences ``bv[i]`` (de Bruijn
indices, 0 is the innermost binder) and named free variables.  Cycles are
read on the de Bruijn tree, so they never capture.

Shifting and substitution are lazy and memoized per node and level; a
subtree whose indices are all below the current level is returned as is,
which keeps regular terms regular.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .core import (
    GRAPH_LIMIT,
    UNIT,
    BackEdge,
    Node,
    RecBind,
    Rule,
    Thunk,
    Trunc,
    deep,
    resolve,
    to_syntax,
)
from .errors import (
    NotARedex,
    ShapeMismatch,
    StepNotApplicable,
    UnguardedCycle,
    UnresolvedIndex,
)
from .rewrite import (
    Step,
    System,
    is_lift,
    is_split,
    lift_node,
    lift_parts,
    refl_hat,
    split_node,
    target,
)
from .compress import lift_steps
from .syntax import Language, Scanner


@dataclass(frozen=True)
class Abs(Rule):
    coind: tuple = (1,)
    hint: str = field(default="x", compare=False)
    name = "lam"

    def conclude(self, premisses):
        return UNIT


@dataclass(frozen=True)
class App(Rule):
    coind: tuple = (1, 1)
    name = "app"

    def conclude(self, premisses):
        return UNIT


@dataclass(frozen=True)
class Bound(Rule):
    index: int
    name = "bv"
    coind = ()

    def conclude(self, premisses):
        return UNIT

    def params_text(self):
        return str(self.index)


@dataclass(frozen=True)
class LVar(Rule):
    name: str
    coind = ()

    def conclude(self, premisses):
        return UNIT


class Flags:
    def __init__(self, a=0, b=0, c=1):
        self.a, self.b, self.c = int(a), int(b), int(c)

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if not re.fullmatch(r"[01]{3}", text):
            raise ValueError(f"flags must be three binary digits, got {text!r}")
        return cls(*text)

    def __str__(self):
        return f"{self.a}{self.b}{self.c}"

    def abs(self, hint="x"):
        return Abs((self.a,), hint)

    def app(self):
        return App((self.b, self.c))


# ---------------------------------------------------------------------------
# graph helpers


def _forced_graph(t, limit):
    """Resolved nodes reachable without forcing anything; None if some
    subtree is still unevaluated or the graph is too large."""
    seen = {}
    order = []
    stack = [t]
    while stack:
        u = stack.pop()
        while not isinstance(u, Node):
            if isinstance(u, Thunk):
                if not u.forced:
                    return None
                u = u.force()
            elif isinstance(u, RecBind):
                u = u.unfold()
            else:
                return None
        if id(u) in seen:
            continue
        if len(seen) >= limit:
            return None
        seen[id(u)] = u
        order.append(u)
        stack.extend(u.children)
    return order


def _fix_free_depth(nodes, leaf, binder):
    """Least fixpoint of the dangling-index bound over a node graph."""
    index = {id(n): i for i, n in enumerate(nodes)}
    kids = [[index[id(_resolved(c))] for c in n.children] for n in nodes]
    val = [leaf(n) for n in nodes]
    changed = True
    while changed:
        changed = False
        for i, n in enumerate(nodes):
            v = leaf(n)
            for j in kids[i]:
                v = max(v, val[j] - binder(n))
            if v > val[i]:
                val[i] = v
                changed = True
    return {id(n): v for n, v in zip(nodes, val)}


def _resolved(u):
    while not isinstance(u, Node):
        u = u.force() if isinstance(u, Thunk) else u.unfold()
    return u


def _graph_free_depth(t, leaf, binder, key, limit):
    n = resolve(t)
    if n.cache and key in n.cache:
        return n.cache[key]
    nodes = _forced_graph(n, limit)
    if nodes is None:
        return None
    vals = _fix_free_depth(nodes, leaf, binder)
    for m in nodes:
        m.memo(key, lambda m=m: vals[id(m)])
    return vals[id(n)]


def _term_leaf(n):
    return n.rule.index + 1 if isinstance(n.rule, Bound) else 0


def _term_binder(n):
    return 1 if isinstance(n.rule, Abs) else 0


def free_depth(t, limit=5_000):
    """Smallest ``k`` such that every index points below ``k`` dangling
    binders; None when unknown (unevaluated or huge)."""
    return _graph_free_depth(t, _term_leaf, _term_binder, "fd", limit)


def _lazy(memo, key, node, make):
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    th = Thunk(node.conclusion, make)
    memo[key] = (node, th)
    return th


# ---------------------------------------------------------------------------
# shifting, substitution, beta


def shift_term(t, d, cutoff=0):
    """Add ``d`` to every index pointing at or above ``cutoff``."""
    if d == 0:
        return t
    memo = {}

    def go(t, k):
        n = resolve(t)
        fd = free_depth(n)
        if fd is not None and fd <= k:
            return n
        r = n.rule
        if isinstance(r, Bound):
            if r.index < k:
                return n
            if r.index + d < 0:
                raise UnresolvedIndex(f"index {r.index} shifted below zero")
            return Node(Bound(r.index + d))
        if not n.children:
            return n
        k2 = k + 1 if isinstance(r, Abs) else k
        return _lazy(memo, (id(n), k), n, lambda: Node(r, [go(c, k2) for c in n.children]))

    return go(t, cutoff)


def subst_term(body, arg, level=0):
    """``body`` with index ``level`` replaced by ``arg`` (shifted under
    binders) and the indices above it lowered by one."""
    memo = {}
    shifted = {}

    def arg_at(k):
        if k not in shifted:
            shifted[k] = shift_term(arg, k)
        return shifted[k]

    def go(t, k):
        n = resolve(t)
        fd = free_depth(n)
        if fd is not None and fd <= k:
            return n
        r = n.rule
        if isinstance(r, Bound):
            if r.index < k:
                return n
            if r.index == k:
                return arg_at(k)
            return Node(Bound(r.index - 1))
        if not n.children:
            return n
        k2 = k + 1 if isinstance(r, Abs) else k
        return _lazy(memo, (id(n), k), n, lambda: Node(r, [go(c, k2) for c in n.children]))

    return go(body, level)


def is_redex(t):
    n = resolve(t)
    return isinstance(n.rule, App) and isinstance(resolve(n.children[0]).rule, Abs)


def beta(t):
    """The root beta step; raises ``NotARedex``."""
    n = resolve(t)
    if not isinstance(n.rule, App):
        raise NotARedex("the root is not an application")
    f = resolve(n.children[0])
    if not isinstance(f.rule, Abs):
        raise NotARedex("the function of the root application is not an abstraction")
    return subst_term(f.children[0], n.children[1], 0)


# ---------------------------------------------------------------------------
# witnesses: shifting and substitution commute with reduction


def _witness_leaf(n):
    if is_lift(n) and isinstance(n.rule.rule, Bound):
        return n.rule.rule.index + 1
    return 0


def _witness_binder(n):
    return 1 if is_lift(n) and isinstance(n.rule.rule, Abs) else 0


def witness_free_depth(w, limit=5_000):
    """Dangling-index bound of the terms a witness mentions in its lifts."""
    return _graph_free_depth(w, _witness_leaf, _witness_binder, "wfd", limit)


def _map_witness(w, level, leaf, memo):
    """Rebuild a witness lazily, replacing bound-variable lifts by
    ``leaf(node, index, level)``; ``level`` counts enclosing lifted binders."""

    def go(t, k):
        n = resolve(t)
        fd = witness_free_depth(n)
        if fd is not None and fd <= k:
            return n
        if is_split(n):
            return _lazy(memo, (id(n), k), n, lambda: Node(n.rule, [go(c, k) for c in n.children]))
        r = n.rule.rule
        if isinstance(r, Bound):
            return leaf(n, r.index, k)
        if not n.children:
            return n
        k2 = k + 1 if isinstance(r, Abs) else k
        return _lazy(memo, (id(n), k), n, lambda: Node(n.rule, [go(c, k2) for c in n.children]))

    return go(w, level)


def shift_witness(w, d, cutoff=0):
    """A witness ``s ->> t`` gives ``shift(s) ->> shift(t)``."""
    if d == 0:
        return w

    def leaf(n, i, k):
        return n if i < k else lift_node(n.rule.gamma, Bound(i + d), [])

    return _map_witness(w, cutoff, leaf, {})


def subst_witness(w, v, level=0):
    """A witness ``s ->> t`` gives ``s[v] ->> t[v]`` (same ``v`` on both
    sides; occurrences of the variable become reflexive witnesses)."""
    shifted = {}

    def leaf(n, i, k):
        if i < k:
            return n
        if i == k:
            if k not in shifted:
                shifted[k] = shift_term(v, k)
            return refl_hat(shifted[k], n.rule.gamma)
        return lift_node(n.rule.gamma, Bound(i - 1), [])

    return _map_witness(w, level, leaf, {})


def lam_pattern_fill(wu, hv, v_src, level=0):
    """From ``u' ->>_d u`` (full) and a hat ``v' ->>^_d v`` build
    ``u'[v'] ->>_d u[v]``."""
    memo = {}
    seg_memo = {}
    shifted_hats = {}

    def hv_at(k):
        if k not in shifted_hats:
            shifted_hats[k] = shift_witness(hv, k)
        return shifted_hats[k]

    def full(t, k):
        n = resolve(t)
        fd = witness_free_depth(n)
        if fd is not None and fd <= k:
            return n

        def make():
            if not is_split(n):
                raise ShapeMismatch("expected a full witness")
            hats = [_map_seg(h, k) for h in n.children[:-1]]
            return Node(n.rule, hats + [final(n.children[-1], k)])

        return _lazy(memo, ("full", id(n), k), n, make)

    def _map_seg(h, k):
        key = (id(resolve(h)), k)
        if key not in seg_memo:
            seg_memo[key] = (h, subst_witness(h, v_src, k))
        return seg_memo[key][1]

    def final(t, k):
        n = resolve(t)
        _, r, kids = lift_parts(n)
        if isinstance(r, Bound):
            if r.index < k:
                return n
            if r.index == k:
                return hv_at(k)
            return lift_node(n.rule.gamma, Bound(r.index - 1), [])
        if not kids:
            return n
        k2 = k + 1 if isinstance(r, Abs) else k
        return _lazy(memo, ("final", id(n), k), n, lambda: Node(n.rule, [full(c, k2) for c in kids]))

    return full(wu, level)


def lam_pattern_extract(engine, w, src):
    """``s ->>_d (\\.u) v`` gives steps ``s =>* (\\.u') v'`` with ``u' ->>_d u``
    and a hat ``v' ->>^_d v``.

    Returns ``(prefix, (wu, u'), (hv, v'))``.
    """
    pre1, hat1, hs1 = engine.prepone_zero_steps(w, src)
    _, rule, kids = lift_parts(hat1)
    if not isinstance(rule, App):
        raise ShapeMismatch(f"expected an application, the witness lifts {rule.text()}")
    wl, wr = kids
    h = resolve(hs1)
    pre2, hat_l, t0 = engine.prepone_zero_steps(wl, h.children[0])
    _, rabs, (wu,) = lift_parts(hat_l)
    if not isinstance(rabs, Abs):
        raise ShapeMismatch(f"expected an abstraction, the witness lifts {rabs.text()}")
    pre3, hv, v1 = engine.prepone_zero_steps(wr, h.children[1])
    prefix = list(pre1) + lift_steps(pre2, 1, rule.coind[0]) + lift_steps(pre3, 2, rule.coind[1])
    u1 = resolve(t0).children[0]
    return prefix, (wu, u1), (hv, v1)


class LambdaSystem(System):
    """Beta reduction under the flags ``abc``."""

    def __init__(self, flags=None):
        self.flags = flags or Flags()
        self.lang = LamTreeLanguage(self.flags)

    def enumerate(self, t):
        return [("beta", beta(t))] if is_redex(t) else []

    def apply(self, name, t):
        if name != "beta":
            raise StepNotApplicable(f"unknown step {name}")
        try:
            return beta(t)
        except NotARedex as e:
            raise StepNotApplicable(str(e)) from None

    def q_step(self, engine, w, src, st):
        if st.path:
            return engine.congruence_q_step(w, src, st)
        if st.name != "beta":
            raise StepNotApplicable(f"unknown step {st.name}")
        if not is_redex(target(w)):
            raise NotARedex("the step is not at a redex of the target")
        prefix, (wu, _), (hv, v1) = lam_pattern_extract(engine, w, src)
        return prefix + [Step((), "beta", 0)], lam_pattern_fill(wu, hv, v1, 0)

    def parse(self, text):
        return parse_lambda(text, self.flags)

    def format(self, t):
        return format_lambda(t)


# ---------------------------------------------------------------------------
# standard presentation of omega-witnesses


@dataclass(frozen=True)
class StdRule(Rule):
    """Finite steps followed by the object rule ``rule``: one rule of the
    usual presentation of strongly convergent reduction."""

    rule: Rule
    steps: tuple
    name = "std"

    @property
    def coind(self):
        return self.rule.coind

    def conclude(self, premisses):
        return self.rule.conclude(premisses)

    def params_text(self):
        return f"{self.rule.text()}: " + " ".join(s.text() for s in self.steps)


@deep
def to_standard_form(w):
    """Fuse each ``split[0: steps](lift[0: r](...))`` into ``std[r: steps]``."""
    memo = {}

    def go(t):
        n = resolve(t)

        def make():
            if not is_split(n) or len(n.children) != 1:
                raise ShapeMismatch("an omega-witness has splits without segments")
            _, r, kids = lift_parts(n.children[0])
            return Node(StdRule(r, n.rule.pres[0]), [go(c) for c in kids])

        return _lazy(memo, id(n), n, make)

    return go(w)


@deep
def from_standard_form(d):
    memo = {}

    def go(t):
        n = resolve(t)

        def make():
            r = n.rule
            if not isinstance(r, StdRule):
                raise ShapeMismatch(f"{r.text()} is not a standard rule")
            return split_node(0, (r.steps,), [], lift_node(0, r.rule, [go(c) for c in n.children]))

        return _lazy(memo, id(n), n, make)

    return go(d)


# ---------------------------------------------------------------------------
# text: the tree grammar (for witnesses) and the lambda syntax


class LamTreeLanguage(Language):
    """``lam(t)``, ``app(t, u)``, ``bv[i]`` and free variable names."""

    def __init__(self, flags):
        self.flags = flags

    def make_rule(self, name, params, nargs):
        if name == "lam" and nargs == 1:
            return self.flags.abs(params.strip() if params else "x")
        if name == "app" and nargs == 2 and params is None:
            return self.flags.app()
        if name == "bv" and nargs == 0 and params is not None:
            return Bound(int(params))
        if nargs == 0 and params is None:
            return LVar(name)
        raise ValueError(f"unknown lambda rule {name} with {nargs} premisses")


_LAM_IDENT = re.compile(r"[^\W\d][\w']*")


def parse_lambda(text, flags=None):
    """Parse ``flags abc`` (optional header) and a term.

    ``\\x y. e`` (or ``λ``), juxtaposition, ``rec L. e`` and ``%n`` for a
    raw de Bruijn index.  A named variable may point past a ``rec`` only if
    no back edge of that ``rec`` sits under a binder inside it.
    """
    sc = Scanner(text)
    m = re.match(r"\s*flags\s+([01]{3})\b", text)
    if m:
        if flags is None:
            flags = Flags.parse(m.group(1))
        sc.pos = m.end()
    flags = flags or Flags()
    p = _LamParser(sc, flags)
    t = p.term([])
    if not sc.at_end():
        raise sc.error(f"unexpected '{sc.peek()}'")
    return t


class _LamParser:
    def __init__(self, sc, flags):
        self.sc = sc
        self.flags = flags
        self.recs = []  # open rec frames: dict(label, binders_at, crossed, under)

    def term(self, scope):
        sc = self.sc
        ch = sc.peek()
        start = sc.pos
        if ch in ("\\", "λ"):
            sc.pos += 1
            names = []
            while sc.peek() != ".":
                names.append(sc.ident())
            if not names:
                raise sc.error("expected a binder name")
            sc.expect(".")
            return self._abs(names, scope)
        if self._at_rec():
            sc.ident()
            label = sc.ident()
            sc.expect(".")
            frame = {"label": label, "depth": len(scope), "outer_ref": False, "edge_under": False}
            self.recs.append(frame)
            body = self.term(scope)
            self.recs.pop()
            if frame["outer_ref"] and frame["edge_under"]:
                raise sc.error(
                    f"rec '{label}' refers to a variable bound outside it and loops under a binder;"
                    " use %n indices for this term",
                    start,
                )
            try:
                return RecBind(label, body)
            except UnguardedCycle as e:
                raise sc.error(str(e), start) from None
        return self.app(scope)

    def _abs(self, names, scope):
        inner = scope + names
        body = self.term(inner)
        for nm in reversed(names):
            body = Node(self.flags.abs(nm), [body])
        return body

    def app(self, scope):
        f = self.atom(scope)
        while True:
            ch = self.sc.peek()
            if ch in ("", ")", ".") or ch in ("\\", "λ"):
                if ch in ("\\", "λ"):
                    f = Node(self.flags.app(), [f, self.term(scope)])
                break
            if self._at_rec():
                f = Node(self.flags.app(), [f, self.term(scope)])
                break
            f = Node(self.flags.app(), [f, self.atom(scope)])
        return f

    def _at_rec(self):
        sc = self.sc
        sc.skip()
        m = _LAM_IDENT.match(sc.text, sc.pos)
        return bool(m and m.group() == "rec")

    def atom(self, scope):
        sc = self.sc
        ch = sc.peek()
        if ch == "(":
            sc.pos += 1
            t = self.term(scope)
            sc.expect(")")
            return t
        if ch == "%":
            sc.pos += 1
            m = re.compile(r"\d+").match(sc.text, sc.pos)
            if not m:
                raise sc.error("expected an index after '%'")
            sc.pos = m.end()
            return Node(Bound(int(m.group())))
        name = sc.ident()
        if name == "rec":
            raise sc.error("'rec' needs parentheses here")
        for frame in reversed(self.recs):
            if frame["label"] == name:
                if len(scope) > frame["depth"]:
                    frame["edge_under"] = True
                return BackEdge(name)
        if name in scope:
            i = len(scope) - 1 - scope[::-1].index(name)
            for frame in self.recs:
                if frame["depth"] > i:
                    frame["outer_ref"] = True
            return Node(Bound(len(scope) - 1 - i))
        return Node(LVar(name))


def format_lambda(t, limit=GRAPH_LIMIT):
    """Print with names; indices that cross a ``rec`` print as ``%n``."""
    s = to_syntax(t, limit)
    free = set()
    labels = set()
    stack = [s]
    while stack:
        u = stack.pop()
        if isinstance(u, RecBind):
            labels.add(u.label)
            stack.append(u.body)
        elif isinstance(u, Node):
            if isinstance(u.rule, LVar):
                free.add(u.rule.name)
            stack.extend(u.children)
    taken = free | labels | {"rec"}

    def fresh(hint, scope):
        base = hint if hint and _LAM_IDENT.fullmatch(hint) else "x"
        name, k = base, 0
        while name in taken or name in scope:
            k += 1
            name = f"{base}{k}"
        return name

    def go(u, scope, barrier, ctx):
        # ctx: 0 top, 1 function position, 2 argument position
        if isinstance(u, BackEdge):
            return u.label
        if isinstance(u, RecBind):
            inner = len(scope) if _loops_under_binder(u) else barrier
            out = f"rec {u.label}. {go(u.body, scope, inner, 0)}"
            return f"({out})" if ctx else out
        r = u.rule
        if isinstance(r, Bound):
            pos = len(scope) - 1 - r.index
            if 0 <= pos and pos >= barrier:
                return scope[pos]
            return f"%{r.index}"
        if isinstance(r, LVar):
            return r.name
        if isinstance(r, Trunc):
            return "*"
        if isinstance(r, Abs):
            nm = fresh(r.hint, scope)
            out = f"\\{nm}. {go(u.children[0], scope + [nm], barrier, 0)}"
            return f"({out})" if ctx else out
        if isinstance(r, App):
            out = f"{go(u.children[0], scope, barrier, 1)} {go(u.children[1], scope, barrier, 2)}"
            return f"({out})" if ctx == 2 else out
        raise ShapeMismatch(f"{r.text()} is not a lambda rule")

    return go(s, [], 0, 0)


def _loops_under_binder(rec):
    stack = [(rec.body, False)]
    while stack:
        u, under = stack.pop()
        if isinstance(u, BackEdge):
            if u.label == rec.label and under:
                return True
        elif isinstance(u, RecBind):
            if u.label != rec.label:
                stack.append((u.body, under))
        else:
            binder = isinstance(u.rule, Abs)
            stack.extend((c, under or binder) for c in u.children)
    return False


def format_lambda_file(t, flags):
    return f"flags {flags}\n{format_lambda(t)}\n"

