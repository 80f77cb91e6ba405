"""First-order infinitary term rewriting.

Terms are trees over constructor rules (one per signature symbol, premisses
coinductive unless overridden) and variable leaves.  Rules ``l -> r`` have
a finite left-hand side; right-hand sides may be cyclic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import (
    Node,
    Pattern,
    Rule,
    Sym,
    UNIT,
    hole,
    is_finite,
    lazy_map,
    pattern_match,
    resolve,
    state_graph,
)
from .errors import DomainError, Mismatch, MissingVariableWitness, NotLinear, StepNotApplicable
from .rewrite import System
from .syntax import Language, parse_tree


@dataclass(frozen=True)
class FOVar(Rule):
    """A variable leaf."""

    name: str
    coind = ()

    def conclude(self, premisses):
        return UNIT


class Signature:
    def __init__(self, arities, inductive=()):
        self.arities = dict(arities)
        self.inductive = set(inductive)
        for name, i in self.inductive:
            if name not in self.arities or not 1 <= i <= self.arities[name]:
                raise ValueError(f"no premiss {i} for symbol {name}")

    def cons(self, name):
        k = self.arities[name]
        return Sym(name, tuple(0 if (name, i) in self.inductive else 1 for i in range(1, k + 1)))

    def __contains__(self, name):
        return name in self.arities


class FOLanguage(Language):
    """Declared symbols are constructors, other nullary names are variables."""

    def __init__(self, sig):
        self.sig = sig

    def make_rule(self, name, params, nargs):
        if params is not None:
            raise ValueError(f"{name} takes no parameters")
        if name in self.sig:
            k = self.sig.arities[name]
            if k != nargs:
                raise ValueError(f"{name} has arity {k}, got {nargs} arguments")
            return self.sig.cons(name)
        if nargs:
            raise ValueError(f"unknown function symbol {name}")
        return FOVar(name)


def is_var(t):
    return isinstance(resolve(t).rule, FOVar)


def variables(t, limit=100_000):
    """Variables of ``t`` in order of first (breadth-first) occurrence."""
    out = []
    for n in state_graph(t, limit):
        if isinstance(n.rule, FOVar) and n.rule.name not in out:
            out.append(n.rule.name)
    return out


def _occurrences(l):
    """Variables of a finite term, left to right with repetitions."""
    out = []
    stack = [l]
    while stack:
        n = resolve(stack.pop())
        if isinstance(n.rule, FOVar):
            out.append(n.rule.name)
        stack.extend(reversed(n.children))
    return out


def is_linear(l):
    occ = _occurrences(l)
    return len(occ) == len(set(occ))


@dataclass(frozen=True, eq=False)
class FORule:
    name: str
    lhs: object
    rhs: object

    def __post_init__(self):
        if is_var(self.lhs):
            raise DomainError(f"rule {self.name}: the left-hand side is a variable")
        if not is_finite(self.lhs):
            raise DomainError(f"rule {self.name}: the left-hand side must be finite")
        extra = set(variables(self.rhs)) - set(_occurrences(self.lhs))
        if extra:
            raise DomainError(f"rule {self.name}: variables {sorted(extra)} only occur on the right")


def check_left_linear(rule):
    return is_linear(rule.lhs)


def subst_apply(sigma, t):
    """Corecursive grafting; variables outside ``sigma`` stay."""

    def step(n, recurse):
        if isinstance(n.rule, FOVar):
            return sigma.get(n.rule.name, n)
        if not n.children:
            return n
        return Node(n.rule, [recurse(c) for c in n.children])

    return lazy_map(t, step)


def lhs_pattern(l):
    """``l`` with its variables replaced by holes, and the variable order."""
    names = _occurrences(l)
    if len(names) != len(set(names)):
        raise NotLinear("left-hand side repeats a variable")
    index = {x: i for i, x in enumerate(names, 1)}

    def go(t):
        n = resolve(t)
        if isinstance(n.rule, FOVar):
            return hole(index[n.rule.name])
        return Node(n.rule, [go(c) for c in n.children])

    return Pattern(go(l), len(names)), names


def template(r, names):
    """``r`` with the listed variables replaced by holes (lazily)."""
    index = {x: i for i, x in enumerate(names, 1)}

    def step(n, recurse):
        if isinstance(n.rule, FOVar) and n.rule.name in index:
            return hole(index[n.rule.name])
        if not n.children:
            return n
        return Node(n.rule, [recurse(c) for c in n.children])

    return lazy_map(r, step)


def match_lhs(l, t):
    """The substitution ``s`` with ``s . l = t``; raises ``Mismatch``."""
    p, names = lhs_pattern(l)
    found = pattern_match(p, t)
    return dict(zip(names, found))


class TRS(System):
    """A left-linear rewriting system; steps are named after the rules."""

    def __init__(self, sig, rules):
        self.sig = sig
        self.lang = FOLanguage(sig)
        self.rules = list(rules)
        self.by_name = {}
        for r in self.rules:
            if not check_left_linear(r):
                raise NotLinear(f"rule {r.name} is not left-linear")
            if r.name in self.by_name:
                raise ValueError(f"duplicate rule name {r.name}")
            self.by_name[r.name] = r
        self._patterns = {r.name: lhs_pattern(r.lhs) for r in self.rules}
        self._templates = {}

    def enumerate(self, t):
        out = []
        for r in self.rules:
            try:
                sigma = match_lhs(r.lhs, t)
            except Mismatch:
                continue
            out.append((r.name, subst_apply(sigma, r.rhs)))
        return out

    def apply(self, name, t):
        r = self.by_name.get(name)
        if r is None:
            raise StepNotApplicable(f"no rule named {name}")
        try:
            sigma = match_lhs(r.lhs, t)
        except Mismatch as e:
            raise StepNotApplicable(f"rule {name} does not match: {e}") from None
        return subst_apply(sigma, r.rhs)

    def root_rewrite(self, t, name):
        p, names = self._patterns[name]
        q = self._templates.get(name)
        if q is None:
            q = self._templates[name] = template(self.by_name[name].rhs, names)
        return p, q

    def parse(self, text):
        return parse_tree(text, self.lang)


# ---------------------------------------------------------------------------
# pattern lemmas, as thin views on the engine


def fo_pattern_extract(engine, w, src, l):
    """``(prefix, tau, {x: (witness, source)})`` with ``src =>* tau . l``."""
    p, names = lhs_pattern(l)
    prefix, parts = engine.extract(w, src, p)
    tau = {x: s for x, (_, s) in zip(names, parts)}
    return prefix, tau, dict(zip(names, parts))


def fo_pattern_fill(engine, r, witnesses, gamma):
    """A witness ``tau . r ->> sigma . r`` from per-variable witnesses."""
    names = variables(r)
    missing = [x for x in names if x not in witnesses]
    if missing:
        raise MissingVariableWitness(f"no witness for {', '.join(missing)}")
    return engine.fill(template(r, names), [witnesses[x] for x in names], gamma)


# ---------------------------------------------------------------------------
# .trs files


_SIG_ITEM = re.compile(r"^([^\W\d][\w']*)/(\d+)$")
_FLAG_ITEM = re.compile(r"^([^\W\d][\w']*)\.(\d+)$")


def parse_trs(text):
    """``sig f/1 a/0 ;`` ``inductive f.1 ;`` then rules ``l -> r ;``.

    Rules are named ``r1, r2, ...`` in order, or ``name: l -> r``.
    """
    text = re.sub(r"--[^\n]*", "", text)
    arities, inductive, raw_rules = {}, [], []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        head = chunk.split(None, 1)
        if head[0] == "sig":
            for item in head[1].split() if len(head) > 1 else []:
                m = _SIG_ITEM.match(item)
                if not m:
                    raise ValueError(f"bad signature item {item!r}")
                arities[m.group(1)] = int(m.group(2))
        elif head[0] == "inductive":
            for item in head[1].split() if len(head) > 1 else []:
                m = _FLAG_ITEM.match(item)
                if not m:
                    raise ValueError(f"bad flag item {item!r}")
                inductive.append((m.group(1), int(m.group(2))))
        else:
            raw_rules.append(chunk)
    sig = Signature(arities, inductive)
    lang = FOLanguage(sig)
    rules = []
    for k, chunk in enumerate(raw_rules, 1):
        name = f"r{k}"
        m = re.match(r"^([^\W\d][\w']*)\s*:(?!:)(.*)$", chunk, re.S)
        if m and "->" in m.group(2):
            name, chunk = m.group(1), m.group(2)
        if "->" not in chunk:
            raise ValueError(f"expected 'l -> r' in {chunk!r}")
        l, r = chunk.split("->", 1)
        rules.append(FORule(name, parse_tree(l, lang), parse_tree(r, lang)))
    return TRS(sig, rules)
