"""Non-wellfounded linear logic with fixed points (mu-MALL) and its
multicut-based cut elimination.

Pre-proofs are trees over the sequent rules below; every rule except the
exchange ``x`` has coinductive premisses.  Statements are sequents.  Cut
elimination is generated by root steps at multicuts.  Each root step is
given by a finite pattern ``p`` and a finite template ``q`` over the same
holes, so the generic compression engine handles this instance.

Multicut coordinates ``(i, j)`` are 1-based: premiss ``i``, formula ``j``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

from .core import (
    GRAPH_LIMIT,
    Node,
    Rule,
    hole,
    pattern_fill,
    pattern_match,
    resolve,
    rule_conclude,
    state_graph,
    truncate,
)
from .errors import (
    DomainError,
    InfrewError,
    InternalInvariant,
    Mismatch,
    NotApplicable,
    NotPartitionable,
    StepNotApplicable,
)
from .rewrite import Step, System, Violation, apply_step
from .syntax import Language, parse_tree, print_tree

# ---------------------------------------------------------------------------
# formulas

BINARY = ("par", "tens", "plus", "with")
CONSTANTS = {"zero": "0", "one": "1", "top": "top", "bot": "bot"}
_DUAL = {
    "atom": "natom",
    "natom": "atom",
    "zero": "top",
    "top": "zero",
    "one": "bot",
    "bot": "one",
    "par": "tens",
    "tens": "par",
    "plus": "with",
    "with": "plus",
    "mu": "nu",
    "nu": "mu",
    "var": "var",
}


@dataclass(frozen=True)
class Formula:
    """``op`` with operands: a name (atoms, variables), two formulas
    (connectives) or a variable name and a body (fixed points)."""

    op: str
    a: object = None
    b: object = None

    def __str__(self):
        return format_formula(self)


def atom(name):
    return Formula("atom", name)


def natom(name):
    return Formula("natom", name)


def fvar(name):
    return Formula("var", name)


def binop(op, f, g):
    return Formula(op, f, g)


def fix(op, x, body):
    return Formula(op, x, body)


ZERO_F = Formula("zero")
ONE_F = Formula("one")
TOP_F = Formula("top")
BOT_F = Formula("bot")


def neg(f):
    """Linear negation; fixed point variables are self-dual."""
    op = _DUAL[f.op]
    if f.op in BINARY:
        return Formula(op, neg(f.a), neg(f.b))
    if f.op in ("mu", "nu"):
        return Formula(op, f.a, neg(f.b))
    return Formula(op, f.a)


def free_vars(f):
    if f.op == "var":
        return {f.a}
    if f.op in BINARY:
        return free_vars(f.a) | free_vars(f.b)
    if f.op in ("mu", "nu"):
        return free_vars(f.b) - {f.a}
    return set()


def is_closed(f):
    return not free_vars(f)


def formula_subst(f, g, x):
    """``f`` with the free occurrences of ``x`` replaced by the closed ``g``."""
    if f.op == "var":
        return g if f.a == x else f
    if f.op in BINARY:
        return Formula(f.op, formula_subst(f.a, g, x), formula_subst(f.b, g, x))
    if f.op in ("mu", "nu"):
        if f.a == x:
            return f
        return Formula(f.op, f.a, formula_subst(f.b, g, x))
    return f


def unfold_fix(f):
    """``F[sX.F/X]`` for ``f = sX.F``."""
    if f.op not in ("mu", "nu"):
        raise DomainError(f"{f} is not a fixed point")
    return formula_subst(f.b, f, f.a)


def formula_size(f):
    if f.op in BINARY:
        return 1 + formula_size(f.a) + formula_size(f.b)
    if f.op in ("mu", "nu"):
        return 1 + formula_size(f.b)
    return 1


# -- text ---------------------------------------------------------------------

_FTOKEN = re.compile(r"\s*(?:(\|-|⊢)|([(),.~;])|([^\W\d][\w']*)|(\d+)|(\S))")
_KEYWORDS = {"par", "tens", "plus", "with", "mu", "nu", "top", "bot"}


def _tokens(text):
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _FTOKEN.match(text, pos)
        if m.group(5):
            raise ValueError(f"unexpected character {m.group(5)!r} in {text!r}")
        out.append(m.group(m.lastindex))
        pos = m.end()
    return out


class _FormulaParser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, tok=None):
        t = self.peek()
        if t is None or (tok is not None and t != tok):
            raise ValueError(f"expected {tok or 'a formula'}, found {t or 'end of input'}")
        self.i += 1
        return t

    def formula(self, scope=frozenset()):
        left = self.unary(scope)
        if self.peek() in BINARY:
            op = self.take()
            return Formula(op, left, self.formula(scope))
        return left

    def unary(self, scope):
        t = self.take()
        if t == "~":
            return neg(self.unary(scope))
        if t == "(":
            f = self.formula(scope)
            self.take(")")
            return f
        if t in ("mu", "nu"):
            x = self.take()
            if not re.match(r"^[^\W\d]", x) or x in _KEYWORDS:
                raise ValueError(f"bad fixed point variable {x!r}")
            self.take(".")
            return Formula(t, x, self.formula(scope | {x}))
        if t == "0":
            return ZERO_F
        if t == "1":
            return ONE_F
        if t == "top":
            return TOP_F
        if t == "bot":
            return BOT_F
        if t in _KEYWORDS or not re.match(r"^[^\W\d]", t):
            raise ValueError(f"unexpected {t!r} in a formula")
        return fvar(t) if t in scope else atom(t)


def parse_formula(text):
    """ASCII formulas: ``A par B``, ``tens``, ``plus``, ``with``, ``mu X. F``,
    ``nu X. F``, ``0 1 top bot``, ``~F``.  Binary connectives associate to
    the right with a single precedence; names bound by ``mu``/``nu`` are
    variables, other names are atoms."""
    p = _FormulaParser(_tokens(text))
    f = p.formula()
    if p.peek() is not None:
        raise ValueError(f"unexpected {p.peek()!r} after formula")
    return f


def format_formula(f):
    if f.op == "atom":
        return f.a
    if f.op == "natom":
        return f"~{f.a}"
    if f.op == "var":
        return f.a
    if f.op in CONSTANTS:
        return CONSTANTS[f.op]
    if f.op in ("mu", "nu"):
        return f"{f.op} {f.a}. {format_formula(f.b)}"
    left = format_formula(f.a)
    if f.a.op in BINARY or f.a.op in ("mu", "nu"):
        left = f"({left})"
    right = format_formula(f.b)
    if f.b.op in BINARY:
        right = f"({right})"
    return f"{left} {f.op} {right}"


@dataclass(frozen=True)
class Sequent:
    formulas: tuple = ()

    def __len__(self):
        return len(self.formulas)

    def __iter__(self):
        return iter(self.formulas)

    def __getitem__(self, i):
        return self.formulas[i]

    def __str__(self):
        body = ", ".join(format_formula(f) for f in self.formulas)
        return f"|- {body}" if body else "|-"


def seq(*formulas):
    return Sequent(tuple(formulas))


def _split_commas(text):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def parse_formula_list(text):
    if not text.strip():
        return ()
    return tuple(parse_formula(p) for p in _split_commas(text))


def parse_sequent(text):
    text = text.strip()
    for head in ("|-", "⊢"):
        if text.startswith(head):
            return Sequent(parse_formula_list(text[len(head) :]))
    raise ValueError(f"a sequent starts with '|-': {text!r}")


# ---------------------------------------------------------------------------
# cut relations


@dataclass(frozen=True)
class CutRel:
    """A set of unordered pairs of coordinates ``((i, j), (i', j'))``."""

    pairs: frozenset = frozenset()

    @staticmethod
    def of(pairs):
        return CutRel(frozenset(tuple(sorted((tuple(a), tuple(b)))) for a, b in pairs))

    def support(self):
        out = []
        for a, b in self.pairs:
            out.append(a)
            out.append(b)
        return out

    def partner(self, x):
        for a, b in self.pairs:
            if a == x:
                return b
            if b == x:
                return a
        return None

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def text(self):
        return "; ".join(f"{a[0]}.{a[1]}~{b[0]}.{b[1]}" for a, b in sorted(self.pairs))


_PAIR = re.compile(r"^\s*(\d+)\.(\d+)\s*~\s*(\d+)\.(\d+)\s*$")


def parse_cutrel(items):
    pairs = []
    for item in items:
        if not item.strip():
            continue
        m = _PAIR.match(item)
        if not m:
            raise ValueError(f"bad cut pair {item!r}, expected 'i.j~i.j'")
        a, b, c, d = (int(g) for g in m.groups())
        pairs.append(((a, b), (c, d)))
    return CutRel.of(pairs)


def reindex_cutrel(pi, rel):
    """``(x, y)`` is related in the result iff ``pi[x]`` and ``pi[y]`` are
    related in ``rel``.  ``pi`` maps new coordinates to old ones and must be
    injective."""
    back = {}
    for new, old in pi.items():
        if old in back:
            raise ValueError(f"index map is not injective at {old}")
        back[old] = new
    pairs = []
    for a, b in rel.pairs:
        if a in back and b in back:
            pairs.append((back[a], back[b]))
    return CutRel.of(pairs)


def uncut_coords(ns, rel):
    """Coordinates outside the support, in lexicographic order."""
    sup = set(rel.support())
    return [(i, j) for i, n in enumerate(ns, 1) for j in range(1, n + 1) if (i, j) not in sup]


def validate_multicut(k, ns, rel, premisses):
    """``(conclusion, violations)``; the conclusion is ``None`` when some
    condition fails.  Tags: Arity, Correctness, Duality, Connectedness,
    Acyclicity."""
    ns = tuple(ns)
    premisses = [tuple(p) for p in premisses]
    out = []
    if len(ns) != k or len(premisses) != k:
        out.append(Violation("Arity", f"{k} premisses declared, {len(ns)} sizes and {len(premisses)} sequents given"))
        return None, out
    for i, (n, p) in enumerate(zip(ns, premisses), 1):
        if n != len(p):
            out.append(Violation("Arity", f"premiss {i} has {len(p)} formulas, declared {n}"))
    if out:
        return None, out

    def inside(x):
        i, j = x
        return 1 <= i <= k and 1 <= j <= ns[i - 1]

    def show(x):
        return f"{x[0]}.{x[1]}"

    sup = rel.support()
    for x in sup:
        if not inside(x):
            out.append(Violation("Correctness", f"{show(x)} is not a premiss formula"))
    seen = {}
    for x in sup:
        seen[x] = seen.get(x, 0) + 1
    for x, c in sorted(seen.items()):
        if c > 1:
            out.append(Violation("Duality", f"{show(x)} is cut against {c} formulas"))
    for a, b in sorted(rel.pairs):
        if a == b:
            out.append(Violation("Duality", f"{show(a)} is cut against itself"))
        elif inside(a) and inside(b):
            fa = premisses[a[0] - 1][a[1] - 1]
            fb = premisses[b[0] - 1][b[1] - 1]
            if fb != neg(fa):
                out.append(Violation("Duality", f"{show(a)} is {fa} but {show(b)} is {fb}, not its dual"))
    # the first projection as a multigraph on premisses, by union-find
    parent = list(range(k + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cyclic = False
    for a, b in sorted(rel.pairs):
        if not (1 <= a[0] <= k and 1 <= b[0] <= k):
            continue
        ra, rb = find(a[0]), find(b[0])
        if ra == rb:
            cyclic = True
        else:
            parent[ra] = rb
    roots = {find(i) for i in range(1, k + 1)}
    if k == 0 or len(roots) > 1:
        out.append(Violation("Connectedness", f"the premisses form {len(roots)} groups, not one"))
    if cyclic:
        out.append(Violation("Acyclicity", "the cuts close a cycle between premisses"))
    if out:
        return None, out
    concl = Sequent(tuple(premisses[i - 1][j - 1] for i, j in uncut_coords(ns, rel)))
    return concl, []


# ---------------------------------------------------------------------------
# rules


def _need(cond, rule, msg):
    if not cond:
        raise DomainError(f"{rule}: {msg}")


@dataclass(frozen=True)
class Ax(Rule):
    formula: Formula
    name = "ax"
    coind = ()

    def conclude(self, premisses):
        return seq(self.formula, neg(self.formula))

    def params_text(self):
        return format_formula(self.formula)


@dataclass(frozen=True)
class Cut(Rule):
    name = "cut"
    coind = (1, 1)

    def conclude(self, premisses):
        a, b = premisses
        _need(len(a) and len(b), "cut", "both premisses need a cut formula")
        _need(b[-1] == neg(a[-1]), "cut", f"{b[-1]} is not the dual of {a[-1]}")
        return Sequent(a.formulas[:-1] + b.formulas[:-1])


@dataclass(frozen=True)
class Exch(Rule):
    """Premiss ``F_s(1) .. F_s(n)``, conclusion ``F_1 .. F_n``."""

    perm: tuple
    name = "x"
    coind = (0,)

    def __post_init__(self):
        if sorted(self.perm) != list(range(1, len(self.perm) + 1)):
            raise DomainError(f"x: {list(self.perm)} is not a permutation")

    def conclude(self, premisses):
        (p,) = premisses
        _need(len(p) == len(self.perm), "x", f"permutation of {len(self.perm)} on a sequent of {len(p)}")
        out = [None] * len(p)
        for i, s in enumerate(self.perm):
            out[s - 1] = p[i]
        return Sequent(tuple(out))

    def params_text(self):
        return ",".join(str(s) for s in self.perm)


@dataclass(frozen=True)
class One(Rule):
    name = "one"
    coind = ()

    def conclude(self, premisses):
        return seq(ONE_F)


@dataclass(frozen=True)
class Top(Rule):
    context: tuple = ()
    name = "top"
    coind = ()

    def conclude(self, premisses):
        return Sequent(tuple(self.context) + (TOP_F,))

    def params_text(self):
        return ", ".join(format_formula(f) for f in self.context)


@dataclass(frozen=True)
class Bot(Rule):
    name = "bot"
    coind = (1,)

    def conclude(self, premisses):
        (p,) = premisses
        return Sequent(p.formulas + (BOT_F,))


@dataclass(frozen=True)
class Par(Rule):
    name = "par"
    coind = (1,)

    def conclude(self, premisses):
        (p,) = premisses
        _need(len(p) >= 2, "par", "the premiss needs two formulas F, G at its end")
        return Sequent(p.formulas[:-2] + (binop("par", p[-2], p[-1]),))


@dataclass(frozen=True)
class Tens(Rule):
    name = "tens"
    coind = (1, 1)

    def conclude(self, premisses):
        a, b = premisses
        _need(len(a) and len(b), "tens", "both premisses need a last formula")
        return Sequent(a.formulas[:-1] + b.formulas[:-1] + (binop("tens", a[-1], b[-1]),))


@dataclass(frozen=True)
class Plus(Rule):
    """``i`` selects the premiss side, ``other`` is the formula of the other side."""

    i: int
    other: Formula
    name = "plus"
    coind = (1,)

    def __post_init__(self):
        if self.i not in (0, 1):
            raise DomainError(f"plus: side {self.i} is not 0 or 1")

    def conclude(self, premisses):
        (p,) = premisses
        _need(len(p) >= 1, "plus", "the premiss needs a last formula")
        f = (p[-1], self.other) if self.i == 0 else (self.other, p[-1])
        return Sequent(p.formulas[:-1] + (binop("plus", *f),))

    def params_text(self):
        return f"{self.i}; {format_formula(self.other)}"


@dataclass(frozen=True)
class With(Rule):
    name = "with"
    coind = (1, 1)

    def conclude(self, premisses):
        a, b = premisses
        _need(len(a) and len(b), "with", "both premisses need a last formula")
        _need(a.formulas[:-1] == b.formulas[:-1], "with", "the premiss contexts differ")
        return Sequent(a.formulas[:-1] + (binop("with", a[-1], b[-1]),))


@dataclass(frozen=True)
class FixRule(Rule):
    formula: Formula
    coind = (1,)

    def __post_init__(self):
        if self.formula.op != self.name:
            raise DomainError(f"{self.name}: {self.formula} is not a {self.name} formula")

    def conclude(self, premisses):
        (p,) = premisses
        _need(len(p) >= 1, self.name, "the premiss needs a last formula")
        want = unfold_fix(self.formula)
        _need(p[-1] == want, self.name, f"the premiss ends with {p[-1]}, expected {want}")
        return Sequent(p.formulas[:-1] + (self.formula,))

    def params_text(self):
        return format_formula(self.formula)


@dataclass(frozen=True)
class Mu(FixRule):
    name = "mu"


@dataclass(frozen=True)
class Nu(FixRule):
    name = "nu"


@dataclass(frozen=True)
class Mcut(Rule):
    k: int
    ns: tuple
    rel: CutRel
    # unchecked multicuts conclude with their uncut formulas whatever the
    # side conditions; used to report violations instead of failing
    checked: bool = True
    name = "mcut"

    @property
    def coind(self):
        return (1,) * self.k

    def conclude(self, premisses):
        concl, bad = validate_multicut(self.k, self.ns, self.rel, premisses)
        if concl is not None:
            return concl
        if not self.checked and not any(v.tag == "Arity" for v in bad):
            sup = set(self.rel.support())
            return Sequent(
                tuple(f for i, p in enumerate(premisses, 1) for j, f in enumerate(p, 1) if (i, j) not in sup)
            )
        raise DomainError("mcut: " + "; ".join(str(v) for v in bad))

    def params_text(self):
        body = f"{self.k}; {','.join(str(n) for n in self.ns)}"
        return f"{body}; {self.rel.text()}" if self.rel.pairs else body


def mcut(ns, rel):
    return Mcut(len(ns), tuple(ns), rel if isinstance(rel, CutRel) else CutRel.of(rel))


def mumall_rule_conclude(rule, premisses):
    return rule_conclude(rule, premisses)


# -- the text format -----------------------------------------------------------


class MumallLanguage(Language):
    """Rule names ``ax[F] cut x[perm] one top[G] bot par tens plus[i; F]
    with mu[F] nu[F] mcut[k; n1,n2; i.j~i.j; ...]``.  Binders carry their
    sequent: ``rec L {|- nu X. X}. nu[nu X. X](L)``."""

    default_statement = None

    def __init__(self, checked=True):
        self.checked = checked

    def parse_statement(self, text):
        return parse_sequent(text)

    def format_statement(self, s):
        return str(s)

    def make_rule(self, name, params, nargs):
        plain = {"cut": Cut, "one": One, "bot": Bot, "par": Par, "tens": Tens, "with": With}
        if name in plain:
            if params is not None:
                raise ValueError(f"{name} takes no parameters")
            return plain[name]()
        if params is None and name != "top":
            raise ValueError(f"{name} needs parameters")
        if name == "ax":
            return Ax(parse_formula(params))
        if name == "x":
            return Exch(tuple(int(s) for s in params.split(",")))
        if name == "top":
            return Top(parse_formula_list(params or ""))
        if name == "plus":
            side, _, f = params.partition(";")
            return Plus(int(side), parse_formula(f))
        if name == "mu":
            return Mu(parse_formula(params))
        if name == "nu":
            return Nu(parse_formula(params))
        if name == "mcut":
            parts = params.split(";")
            if len(parts) < 2:
                raise ValueError("mcut[k; n1,...,nk; pairs...]")
            k = int(parts[0])
            ns = tuple(int(s) for s in parts[1].split(",") if s.strip())
            return Mcut(k, ns, parse_cutrel(parts[2:]), self.checked)
        raise ValueError(f"unknown rule {name!r}")


def parse_proof(text, checked=True):
    return parse_tree(text, MumallLanguage(checked))


def print_proof(t):
    return print_tree(t, MumallLanguage())


# ---------------------------------------------------------------------------
# root steps

KINDS = (
    "Merge",
    "Perm",
    "Ax",
    "TensorPar",
    "WithPlus",
    "MuNu",
    "BotOne",
    "CommPar",
    "CommTensor",
    "CommOne",
    "CommBot",
    "CommPlus",
    "CommWith",
    "CommFix",
    "CommTop",
    "CommExch",
)

# preference of the cut-elimination driver: housekeeping and principal
# steps first, then commutations
PRIORITY = (
    "Merge",
    "Ax",
    "TensorPar",
    "WithPlus",
    "MuNu",
    "BotOne",
    "CommOne",
    "CommTop",
    "CommBot",
    "CommPar",
    "CommPlus",
    "CommWith",
    "CommFix",
    "CommExch",
    "CommTensor",
)

_COMM = {Par: "CommPar", Bot: "CommBot", Plus: "CommPlus", With: "CommWith", Mu: "CommFix", Nu: "CommFix", Top: "CommTop"}
_PRINCIPAL = {(Tens, Par): "TensorPar", (With, Plus): "WithPlus", (Mu, Nu): "MuNu", (Bot, One): "BotOne"}


@dataclass(frozen=True)
class RootStep:
    """A root step kind; ``tau`` is set for premiss permutations."""

    kind: str
    tau: tuple | None = None

    @property
    def name(self):
        if self.tau is None:
            return self.kind
        return f"{self.kind}[{','.join(str(s) for s in self.tau)}]"

    def __str__(self):
        return self.name


def parse_root_step(name):
    m = re.match(r"^(\w+)(?:\[([\d,\s]*)\])?$", name.strip())
    if not m or m.group(1) not in KINDS:
        raise StepNotApplicable(f"unknown root step {name!r}")
    kind = m.group(1)
    if (kind == "Perm") != (m.group(2) is not None):
        raise StepNotApplicable(f"only Perm takes a permutation: {name!r}")
    tau = tuple(int(s) for s in m.group(2).split(",") if s.strip()) if m.group(2) is not None else None
    return RootStep(kind, tau)


class _Ctx:
    """A multicut node opened for one root step."""

    def __init__(self, t):
        n = resolve(t)
        if not isinstance(n.rule, Mcut):
            raise NotApplicable(f"root steps apply at multicuts, found {n.rule.text()}")
        self.node = n
        self.rule = n.rule
        self.k = n.rule.k
        self.ns = n.rule.ns
        self.rel = n.rule.rel
        self.prem = [resolve(c) for c in n.children]
        self.seqs = [c.conclusion for c in n.children]
        self.count = 0
        self.holes = {}
        self.opened = {}

    def _hole(self, t):
        self.count += 1
        return hole(self.count, t.conclusion)

    def ctx(self, i):
        """The hole standing for premiss ``i`` as a whole."""
        if i not in self.holes:
            self.holes[i] = self._hole(self.node.children[i - 1])
        return self.holes[i]

    def open(self, i):
        """Premiss ``i`` with its last rule exposed: ``(node, holes)``."""
        if i not in self.opened:
            p = self.prem[i - 1]
            hs = [self._hole(c) for c in p.children]
            self.opened[i] = (Node(p.rule, hs), hs)
        return self.opened[i]

    def pattern(self):
        kids = [self.opened[i][0] if i in self.opened else self.ctx(i) for i in range(1, self.k + 1)]
        return Node(self.rule, kids)

    def rule_at(self, i):
        return self.prem[i - 1].rule

    def last_uncut(self, i):
        return self.rel.partner((i, self.ns[i - 1])) is None

    def cut_last(self, a, b):
        return self.ns[a - 1] >= 1 and self.ns[b - 1] >= 1 and self.rel.partner((a, self.ns[a - 1])) == (b, self.ns[b - 1])


def _build(rule, kids):
    try:
        return Node(rule, kids)
    except DomainError as e:
        raise InternalInvariant(f"a root step built an ill-formed {rule.text()}: {e}") from None


def _new_mcut(ns, pi, rel, fresh=()):
    r = reindex_cutrel(pi, rel)
    return Mcut(len(ns), tuple(ns), CutRel.of(list(r.pairs) + list(fresh)))


def _exchange(tree, new_old, old_order):
    """Put ``tree`` under the exchange sending each of its conclusion
    positions (known by old coordinate, ``new_old``) to the position of that
    coordinate in ``old_order``; nothing when this is the identity."""
    where = {c: p for p, c in enumerate(old_order, 1)}
    sigma = tuple(where[c] for c in new_old)
    if sigma == tuple(range(1, len(sigma) + 1)):
        return tree
    return _build(Exch(sigma), [tree])


def _identity_map(ns, upto):
    return {(i, j): (i, j) for i in range(1, upto + 1) for j in range(1, ns[i - 1] + 1)}


def _step_merge(c):
    k = c.k
    if not isinstance(c.rule_at(k), Cut):
        raise NotApplicable("Merge needs a cut as last premiss")
    node, (ha, hb) = c.open(k)
    g = len(ha.rule.statement) - 1
    d = len(hb.rule.statement) - 1
    ns = c.ns[:-1] + (g + 1, d + 1)
    pi = _identity_map(c.ns, k - 1)
    pi.update({(k, j): (k, j) for j in range(1, g + 1)})
    pi.update({(k + 1, j): (k, g + j) for j in range(1, d + 1)})
    m = _new_mcut(ns, pi, c.rel, [((k, g + 1), (k + 1, d + 1))])
    return _build(m, [c.ctx(i) for i in range(1, k)] + [ha, hb])


def _step_perm(c, tau):
    k = c.k
    if sorted(tau) != list(range(1, k + 1)):
        raise NotApplicable(f"{list(tau)} is not a permutation of the {k} premisses")
    ns = tuple(c.ns[t - 1] for t in tau)
    pi = {(p, j): (t, j) for p, t in enumerate(tau, 1) for j in range(1, c.ns[t - 1] + 1)}
    m = _new_mcut(ns, pi, c.rel)
    inner = _build(m, [c.ctx(t) for t in tau])
    new_old = [pi[x] for x in uncut_coords(ns, m.rel)]
    return _exchange(inner, new_old, uncut_coords(c.ns, c.rel))


def _principal_pair(c, kind):
    k = c.k
    if k < 2:
        raise NotApplicable(f"{kind} needs two active premisses")
    a, b = k - 1, k
    want = {v: key for key, v in _PRINCIPAL.items()}.get(kind)
    if want is not None:
        ra, rb = want
        if not (isinstance(c.rule_at(a), ra) and isinstance(c.rule_at(b), rb)):
            raise NotApplicable(f"{kind} needs {ra.name} then {rb.name} as last premisses")
    if not c.cut_last(a, b):
        raise NotApplicable(f"{kind}: the principal formulas of the last two premisses are not cut together")
    return a, b


def _step_ax(c):
    k = c.k
    if k < 2 or not isinstance(c.rule_at(k - 1), Ax):
        raise NotApplicable("Ax needs an axiom as second to last premiss")
    a, b = k - 1, k
    if c.rel.partner((a, 2)) != (b, c.ns[b - 1]):
        raise NotApplicable("Ax: the axiom's second formula is not cut against the last formula of the last premiss")
    g = c.ns[b - 1] - 1
    ns = c.ns[: a - 1] + (g + 1,)
    pi = _identity_map(c.ns, a - 1)
    pi.update({(a, j): (b, j) for j in range(1, g + 1)})
    pi[(a, g + 1)] = (a, 1)
    m = _new_mcut(ns, pi, c.rel)
    inner = _build(m, [c.ctx(i) for i in range(1, a)] + [c.ctx(b)])
    new_old = [pi[x] for x in uncut_coords(ns, m.rel)]
    return _exchange(inner, new_old, uncut_coords(c.ns, c.rel))


def _step_tensor_par(c):
    a, b = _principal_pair(c, "TensorPar")
    _, (hg, hd) = c.open(a)
    _, (he,) = c.open(b)
    g = len(hg.rule.statement) - 1
    d = len(hd.rule.statement) - 1
    e = len(he.rule.statement) - 2
    ns = c.ns[: a - 1] + (g + 1, d + 1, e + 2)
    pi = _identity_map(c.ns, a - 1)
    pi.update({(a, j): (a, j) for j in range(1, g + 1)})
    pi.update({(a + 1, j): (a, g + j) for j in range(1, d + 1)})
    pi.update({(a + 2, j): (b, j) for j in range(1, e + 1)})
    fresh = [((a, g + 1), (a + 2, e + 1)), ((a + 1, d + 1), (a + 2, e + 2))]
    m = _new_mcut(ns, pi, c.rel, fresh)
    return _build(m, [c.ctx(i) for i in range(1, a)] + [hg, hd, he])


def _step_with_plus(c):
    a, b = _principal_pair(c, "WithPlus")
    _, (h0, h1) = c.open(a)
    _, (hb,) = c.open(b)
    keep = h0 if c.rule_at(b).i == 0 else h1
    return _build(c.rule, [c.ctx(i) for i in range(1, a)] + [keep, hb])


def _step_mu_nu(c):
    a, b = _principal_pair(c, "MuNu")
    _, (ha,) = c.open(a)
    _, (hb,) = c.open(b)
    return _build(c.rule, [c.ctx(i) for i in range(1, a)] + [ha, hb])


def _step_bot_one(c):
    a, b = _principal_pair(c, "BotOne")
    _, (hg,) = c.open(a)
    c.open(b)
    g = c.ns[a - 1] - 1
    ns = c.ns[: a - 1] + (g,)
    pi = _identity_map(ns, a)
    m = _new_mcut(ns, pi, c.rel)
    return _build(m, [c.ctx(i) for i in range(1, a)] + [hg])


def _comm_last(c, kind, rule_type):
    k = c.k
    if k < 1 or not isinstance(c.rule_at(k), rule_type):
        raise NotApplicable(f"{kind} needs a {rule_type.name} rule as last premiss")
    if not c.last_uncut(k):
        raise NotApplicable(f"{kind}: the principal formula of the last premiss is cut")
    return k


def _step_comm_par(c):
    k = _comm_last(c, "CommPar", Par)
    node, (h,) = c.open(k)
    m = Mcut(k, c.ns[:-1] + (c.ns[-1] + 1,), c.rel)
    return _build(Par(), [_build(m, [c.ctx(i) for i in range(1, k)] + [h])])


def _step_comm_bot(c):
    k = _comm_last(c, "CommBot", Bot)
    node, (h,) = c.open(k)
    m = Mcut(k, c.ns[:-1] + (c.ns[-1] - 1,), c.rel)
    return _build(Bot(), [_build(m, [c.ctx(i) for i in range(1, k)] + [h])])


def _step_comm_unary(c, kind, rule_type):
    k = _comm_last(c, kind, rule_type)
    node, (h,) = c.open(k)
    return _build(node.rule, [_build(c.rule, [c.ctx(i) for i in range(1, k)] + [h])])


def _step_comm_fix(c):
    k = c.k
    rt = Mu if k >= 1 and isinstance(c.rule_at(k), Mu) else Nu
    return _step_comm_unary(c, "CommFix", rt)


def _step_comm_with(c):
    k = _comm_last(c, "CommWith", With)
    node, (ha, hb) = c.open(k)
    ctx = [c.ctx(i) for i in range(1, k)]
    return _build(With(), [_build(c.rule, ctx + [ha]), _build(c.rule, ctx + [hb])])


def _step_comm_top(c):
    k = _comm_last(c, "CommTop", Top)
    for i in range(1, k):
        c.ctx(i)
    c.open(k)
    sigma = c.node.conclusion.formulas[:-1]
    return _build(Top(sigma), [])


def _step_comm_one(c):
    if not (c.k == 1 and c.ns == (1,) and not c.rel.pairs and isinstance(c.rule_at(1), One)):
        raise NotApplicable("CommOne needs mcut[1; 1] over the one rule")
    c.open(1)
    return _build(One(), [])


def _step_comm_exch(c):
    k = c.k
    if k < 1 or not isinstance(c.rule_at(k), Exch):
        raise NotApplicable("CommExch needs an exchange as last premiss")
    node, (h,) = c.open(k)
    sigma = node.rule.perm
    pi = _identity_map(c.ns, k - 1)
    pi.update({(k, j): (k, s) for j, s in enumerate(sigma, 1)})
    m = _new_mcut(c.ns, pi, c.rel)
    inner = _build(m, [c.ctx(i) for i in range(1, k)] + [h])
    new_old = [pi[x] for x in uncut_coords(c.ns, m.rel)]
    return _exchange(inner, new_old, uncut_coords(c.ns, c.rel))


def partition_tensor_premisses(rel, k, t, gamma_len):
    """Context premisses (all but ``t``) split by the side of the tensor
    premiss ``t`` they are connected to: formulas ``1..gamma_len`` of ``t``
    are the left side, the later ones the right side.  Premisses connected
    to neither side go left."""
    adj = {i: set() for i in range(1, k + 1)}
    attach = {}
    for a, b in rel.pairs:
        for x, y in ((a, b), (b, a)):
            if x[0] == t and y[0] != t:
                attach.setdefault(y[0], set()).add("G" if x[1] <= gamma_len else "D")
            elif x[0] != t and y[0] != t:
                adj[x[0]].add(y[0])
    side = {}
    for start in range(1, k + 1):
        if start == t or start in side:
            continue
        comp, queue = [], deque([start])
        seen = {start}
        while queue:
            i = queue.popleft()
            comp.append(i)
            for j in adj[i]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        sides = set()
        for i in comp:
            sides |= attach.get(i, set())
        if len(sides) > 1:
            raise NotPartitionable(f"premisses {sorted(comp)} reach both tensor premisses")
        s = sides.pop() if sides else "G"
        for i in comp:
            side[i] = s
    left = [i for i in range(1, k + 1) if side.get(i) == "G"]
    right = [i for i in range(1, k + 1) if side.get(i) == "D"]
    return left, right


def _tensor_split(c, t):
    _, (hg, hd) = c.open(t)
    return partition_tensor_premisses(c.rel, c.k, t, len(hg.rule.statement) - 1)


def _step_comm_tensor(c):
    K = c.k
    if K < 1 or not isinstance(c.rule_at(K), Tens):
        raise NotApplicable("CommTensor needs a tensor as last premiss")
    if not c.last_uncut(K):
        raise NotApplicable("CommTensor: the tensor formula is cut")
    left, right = _tensor_split(c, K)
    k, l = len(left), len(right)
    if left + right != list(range(1, K)):
        raise NotApplicable("CommTensor: the premisses of the two sides are not in order")
    _, (hg, hd) = c.open(K)
    g = len(hg.rule.statement) - 1
    d = len(hd.rule.statement) - 1
    ns1 = c.ns[:k] + (g + 1,)
    pi1 = _identity_map(c.ns, k)
    pi1.update({(k + 1, j): (K, j) for j in range(1, g + 1)})
    m1 = _new_mcut(ns1, pi1, c.rel)
    ns2 = c.ns[k : k + l] + (d + 1,)
    pi2 = {(i, j): (k + i, j) for i in range(1, l + 1) for j in range(1, c.ns[k + i - 1] + 1)}
    pi2.update({(l + 1, j): (K, g + j) for j in range(1, d + 1)})
    m2 = _new_mcut(ns2, pi2, c.rel)
    left_tree = _build(m1, [c.ctx(i) for i in range(1, k + 1)] + [hg])
    right_tree = _build(m2, [c.ctx(k + i) for i in range(1, l + 1)] + [hd])
    tens = _build(Tens(), [left_tree, right_tree])
    new_old = [pi1[x] for x in uncut_coords(ns1, m1.rel)[:-1]]
    new_old += [pi2[x] for x in uncut_coords(ns2, m2.rel)[:-1]]
    new_old.append((K, c.ns[-1]))
    return _exchange(tens, new_old, uncut_coords(c.ns, c.rel))


_STEPS = {
    "Merge": _step_merge,
    "Ax": _step_ax,
    "TensorPar": _step_tensor_par,
    "WithPlus": _step_with_plus,
    "MuNu": _step_mu_nu,
    "BotOne": _step_bot_one,
    "CommPar": _step_comm_par,
    "CommTensor": _step_comm_tensor,
    "CommOne": _step_comm_one,
    "CommBot": _step_comm_bot,
    "CommPlus": lambda c: _step_comm_unary(c, "CommPlus", Plus),
    "CommWith": _step_comm_with,
    "CommFix": _step_comm_fix,
    "CommTop": _step_comm_top,
    "CommExch": _step_comm_exch,
}


def root_step_patterns(t, step):
    """``(p, q)``: the finite pattern matched at the multicut ``t`` and the
    template it is rewritten to, over the same numbered holes."""
    if isinstance(step, str):
        step = parse_root_step(step)
    c = _Ctx(t)
    if step.kind == "Perm":
        q = _step_perm(c, step.tau)
    else:
        q = _STEPS[step.kind](c)
    p = c.pattern()
    if q.conclusion != c.node.conclusion:
        raise InternalInvariant(f"{step.name} changed the conclusion {c.node.conclusion} into {q.conclusion}")
    return p, q


def apply_root_step(step, t):
    p, q = root_step_patterns(t, step)
    try:
        return pattern_fill(q, pattern_match(p, t))
    except Mismatch as e:
        raise InternalInvariant(str(e)) from None


def _order_for(k, active):
    rest = [i for i in range(1, k + 1) if i not in active]
    return tuple(rest + list(active))


def root_step_candidates(t):
    """``[(kind, tau)]``: each step whose left-hand shape occurs at the
    multicut ``t`` once its premisses are ordered by ``tau``."""
    n = resolve(t)
    if not isinstance(n.rule, Mcut):
        return []
    k, ns, rel = n.rule.k, n.rule.ns, n.rule.rel
    prem = [resolve(c) for c in n.children]
    out = []
    for a in range(1, k + 1):
        ra = prem[a - 1].rule
        last = (a, ns[a - 1])
        partner = rel.partner(last) if ns[a - 1] else None
        if isinstance(ra, Cut):
            out.append(("Merge", _order_for(k, [a])))
        if isinstance(ra, Ax):
            b = rel.partner((a, 2))
            if b is not None and b[0] != a and b[1] == ns[b[0] - 1]:
                out.append(("Ax", _order_for(k, [a, b[0]])))
        if partner is not None and partner[1] == ns[partner[0] - 1] and partner[0] != a:
            rb = prem[partner[0] - 1].rule
            for (ta, tb), kind in _PRINCIPAL.items():
                if isinstance(ra, ta) and isinstance(rb, tb):
                    out.append((kind, _order_for(k, [a, partner[0]])))
        if partner is None and ns[a - 1]:
            for rt, kind in _COMM.items():
                if isinstance(ra, rt):
                    out.append((kind, _order_for(k, [a])))
            if isinstance(ra, Tens):
                gl = len(prem[a - 1].children[0].conclusion) - 1
                try:
                    left, right = partition_tensor_premisses(rel, k, a, gl)
                except NotPartitionable:
                    left = None
                if left is not None:
                    out.append(("CommTensor", tuple(left + right + [a])))
        if isinstance(ra, Exch):
            out.append(("CommExch", _order_for(k, [a])))
        if isinstance(ra, One) and k == 1 and ns == (1,) and not rel.pairs:
            out.append(("CommOne", (1,)))
    return out


def applicable_root_steps(t):
    """Root steps applicable at ``t`` as it stands, followed by the premiss
    permutations that make further steps applicable."""
    direct, perms = [], []
    n = resolve(t)
    if not isinstance(n.rule, Mcut):
        return []
    ident = tuple(range(1, n.rule.k + 1))
    for kind, tau in root_step_candidates(n):
        st = RootStep(kind) if tau == ident else RootStep("Perm", tau)
        bucket = direct if tau == ident else perms
        if st not in bucket:
            bucket.append(st)
    return direct + perms


class MumallSystem(System):
    """Cut elimination; step names are root step names (``Perm[2,1]``)."""

    def __init__(self):
        self.lang = MumallLanguage()

    def enumerate(self, t):
        out = []
        for st in applicable_root_steps(t):
            try:
                out.append((st.name, apply_root_step(st, t)))
            except NotApplicable:
                continue
        return out

    def apply(self, name, t):
        st = parse_root_step(name)
        try:
            return apply_root_step(st, t)
        except NotApplicable as e:
            raise StepNotApplicable(str(e)) from None

    def root_rewrite(self, t, name):
        try:
            p, q = root_step_patterns(t, name)
        except NotApplicable as e:
            raise StepNotApplicable(str(e)) from None
        return p, q

    def parse(self, text):
        return parse_proof(text)


def mumall_pattern_extract(engine, w, src, p):
    return engine.extract(w, src, p)


def mumall_pattern_fill(engine, q, witnesses, gamma):
    return engine.fill(q, witnesses, gamma)


# ---------------------------------------------------------------------------
# well-formedness and the cut-elimination driver


def check_proof(t, limit=GRAPH_LIMIT):
    """Violations of every multicut of ``t`` (parsed unchecked) as
    ``[(node text, Violation)]``."""
    out = []
    for n in state_graph(t, limit):
        if isinstance(n.rule, Mcut):
            _, bad = validate_multicut(n.rule.k, n.rule.ns, n.rule.rel, [c.conclusion for c in n.children])
            out.extend((n.rule.text(), v) for v in bad)
    return out


def is_cut_free(t, limit=GRAPH_LIMIT):
    return not any(isinstance(n.rule, (Cut, Mcut)) for n in state_graph(t, limit))


@dataclass
class StuckReport:
    reason: str
    steps: list = field(default_factory=list)
    truncation: object = None

    def __str__(self):
        return f"stuck after {len(self.steps)} steps: {self.reason}"


def _cut_sites(t, d, limit):
    """Cut and multicut nodes strictly above depth ``d``, outermost first."""
    out = []
    queue = deque([((), t, 0)])
    seen = 0
    while queue:
        path, u, depth = queue.popleft()
        seen += 1
        if seen > limit:
            break
        n = resolve(u)
        if isinstance(n.rule, (Cut, Mcut)):
            out.append((depth, path, n))
        for i, (f, c) in enumerate(zip(n.rule.coind, n.children), 1):
            if depth + f < d:
                queue.append((path + (i,), c, depth + f))
    out.sort(key=lambda x: (x[0], len(x[1]), x[1]))
    return out


def choose_step(n):
    """The driver's choice at a multicut: the best kind by ``PRIORITY``,
    preceded by the premiss permutation it needs."""
    k = n.rule.k
    ident = tuple(range(1, k + 1))
    best = None
    for kind, tau in root_step_candidates(n):
        key = (PRIORITY.index(kind), tau != ident)
        if best is None or key < best[0]:
            best = (key, kind, tau)
    if best is None:
        return None
    _, kind, tau = best
    return RootStep(kind) if tau == ident else RootStep("Perm", tau)


def cut_elim_observe(p, d, fuel=10_000, limit=100_000):
    """Apply root steps at outermost multicuts until the depth-``d``
    truncation is cut free.  Returns ``(steps, truncation)``, or
    ``(steps, StuckReport)`` when no step applies or fuel runs out."""
    system = MumallSystem()
    steps = []
    cur = p
    for _ in range(fuel + 1):
        sites = _cut_sites(cur, d, limit)
        if not sites:
            return steps, truncate(cur, d)
        if len(steps) >= fuel:
            return steps, StuckReport("fuel exhausted", steps, truncate(cur, d))
        for depth, path, n in sites:
            if not isinstance(n.rule, Mcut):
                continue
            st = choose_step(n)
            if st is None:
                continue
            try:
                cur, done = apply_step(cur, Step(path, st.name), system)
            except (StepNotApplicable, InfrewError):
                continue
            steps.append(done)
            break
        else:
            return steps, StuckReport("no root step applies to the remaining cuts", steps, truncate(cur, d))
    return steps, StuckReport("fuel exhausted", steps, truncate(cur, d))

