"""Derivation rules and possibly infinite derivation trees.

A tree is one of four things:

* ``Node(rule, children)``: a rule applied to subtrees;
* ``RecBind(label, body)`` together with ``BackEdge(label)`` leaves, for
  regular (cyclic) trees;
* ``Thunk(conclusion, fn)``: a lazily generated subtree;
* the truncation axiom, which is just ``Node(Trunc(S), ())``.

``resolve`` turns any of them into a ``Node``.  Unfolding a ``RecBind`` is
cached on the binder and every back edge is replaced by the binder object
itself, so the resolved nodes of a regular tree form a finite graph that
can be explored by object identity.
"""

from __future__ import annotations

import functools
import queue
import sys
import threading
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    DomainError,
    Mismatch,
    NonProductive,
    NotRegular,
    UnboundBackEdge,
    UnguardedCycle,
)


class Unit:
    """The single statement of term-like instances, printed as a bullet."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "•"

    def __reduce__(self):
        return (Unit, ())


UNIT = Unit()

# budgets shared by the lazy machinery
FORCE_BUDGET = 10_000
GRAPH_LIMIT = 200_000


# ---------------------------------------------------------------------------
# deep recursion

# Corecursive operations recurse along tree paths; the default C stack of
# the main thread is too small for the recursion limits they need.
_DEEP_STACK = 512 * 1024 * 1024
_DEEP_LIMIT = 200_000
_deep = threading.local()
_idle = queue.SimpleQueue()


class _Worker:
    """A daemon thread with a large stack, reused across deep calls."""

    def __init__(self):
        self.jobs = queue.SimpleQueue()
        if sys.getrecursionlimit() < _DEEP_LIMIT:
            sys.setrecursionlimit(_DEEP_LIMIT)
        old = threading.stack_size()
        threading.stack_size(_DEEP_STACK)
        try:
            threading.Thread(target=self._loop, daemon=True).start()
        finally:
            threading.stack_size(old)

    def _loop(self):
        _deep.active = True
        while True:
            job, box, done = self.jobs.get()
            try:
                box["value"] = job()
            except BaseException as e:  # re-raised on the calling thread
                box["error"] = e
            job = None
            _idle.put(self)
            done.set()


def deep(fn):
    """Run ``fn`` on a worker thread with a large stack (once per call chain)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if getattr(_deep, "active", False):
            return fn(*args, **kwargs)
        try:
            worker = _idle.get_nowait()
        except queue.Empty:
            worker = _Worker()
        box, done = {}, threading.Event()
        worker.jobs.put((lambda: fn(*args, **kwargs), box, done))
        done.wait()
        if "error" in box:
            raise box["error"]
        return box["value"]

    return wrapper


# ---------------------------------------------------------------------------
# rules


class Rule:
    """A derivation rule: arity, (co)inductive premisses, partial conclusion.

    Subclasses are expected to be immutable and to compare structurally.
    ``coind`` is a tuple of 0/1 flags, one per premiss.
    """

    name = "?"
    coind: tuple = ()

    @property
    def arity(self):
        return len(self.coind)

    def conclude(self, premisses):
        raise NotImplementedError

    def params_text(self):
        return None

    def text(self):
        p = self.params_text()
        return self.name if p is None else f"{self.name}[{p}]"

    def __str__(self):
        return self.text()


@dataclass(frozen=True)
class Sym(Rule):
    """A plain constructor over the unit statement."""

    name: str
    coind: tuple = ()
    params: str | None = None

    def conclude(self, premisses):
        for p in premisses:
            if p is not UNIT:
                raise DomainError(f"{self.name} expects unit premisses, got {p!r}")
        return UNIT

    def params_text(self):
        return self.params


@dataclass(frozen=True)
class Trunc(Rule):
    """The axiom introducing statement ``S`` (used to seal truncations)."""

    statement: object
    name = "#"
    coind = ()

    def conclude(self, premisses):
        return self.statement

    def text(self):
        return "*" if self.statement is UNIT else f"#{{{self.statement}}}"


@dataclass(frozen=True)
class Hole(Rule):
    """Numbered hole of a pattern, standing for a subtree with ``statement``."""

    index: int
    statement: object = UNIT
    name = "?"
    coind = ()

    def conclude(self, premisses):
        return self.statement

    def text(self):
        return f"?{self.index}"


def rule_conclude(rule, premisses):
    premisses = tuple(premisses)
    if len(premisses) != rule.arity:
        raise DomainError(f"{rule.text()} expects {rule.arity} premisses, got {len(premisses)}")
    return rule.conclude(premisses)


# ---------------------------------------------------------------------------
# trees


class DTree:
    __slots__ = ()


class Node(DTree):
    __slots__ = ("rule", "children", "conclusion", "cache", "_hash")

    def __init__(self, rule, children=()):
        children = tuple(children)
        self.rule = rule
        self.children = children
        self.conclusion = rule_conclude(rule, [c.conclusion for c in children])
        self.cache = None
        self._hash = None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Node):
            return NotImplemented
        return self.rule == other.rule and self.children == other.children

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.rule, self.children))
        return self._hash

    def memo(self, key, make):
        """Per-node memo table used by corecursive operations."""
        c = self.cache
        if c is None:
            c = self.cache = {}
        try:
            return c[key]
        except KeyError:
            v = c[key] = make()
            return v

    def __repr__(self):
        return f"Node({format_tree(self)})"


class BackEdge(DTree):
    __slots__ = ("label", "conclusion")

    def __init__(self, label, conclusion=UNIT):
        self.label = label
        self.conclusion = conclusion

    def __repr__(self):
        return f"BackEdge({self.label})"


class RecBind(DTree):
    __slots__ = ("label", "body", "conclusion", "_unfolded")

    def __init__(self, label, body, check=True):
        self.label = label
        self.body = body
        self.conclusion = body.conclusion
        self._unfolded = None
        if check:
            check_guarded(self)

    def unfold(self):
        if self._unfolded is None:
            self._unfolded = _substitute_label(self.body, self.label, self)
        return self._unfolded

    def __repr__(self):
        return f"RecBind({self.label}, {self.body!r})"


_forcing = threading.local()
_force_lock = threading.Lock()


class Thunk(DTree):
    """Lazily produced subtree with a declared conclusion.

    ``fn`` is called at most once per visible value: concurrent forcers may
    both compute, but only the first result is kept.
    """

    __slots__ = ("conclusion", "_fn", "_value")

    def __init__(self, conclusion, fn):
        self.conclusion = conclusion
        self._fn = fn
        self._value = None

    def force(self):
        fn = self._fn
        if fn is None:
            return self._value
        active = getattr(_forcing, "ids", None)
        if active is None:
            active = _forcing.ids = set()
        if id(self) in active:
            raise NonProductive("a lazy subtree depends on itself without progress")
        active.add(id(self))
        try:
            v = fn()
        finally:
            active.discard(id(self))
        if not isinstance(v, DTree):
            raise TypeError(f"thunk produced {type(v).__name__}, not a tree")
        if v.conclusion != self.conclusion:
            raise DomainError(
                f"thunk declared conclusion {self.conclusion!r} but produced {v.conclusion!r}"
            )
        with _force_lock:
            if self._value is None:
                self._value = v
                self._fn = None
        return self._value

    @property
    def forced(self):
        return self._value is not None

    def __repr__(self):
        return "Thunk(forced)" if self.forced else "Thunk(...)"


def trunc_axiom(statement):
    return Node(Trunc(statement), ())


def is_trunc(t):
    return isinstance(t, Node) and isinstance(t.rule, Trunc)


def _substitute_label(t, label, target):
    memo = {}

    def go(t):
        key = id(t)
        if key in memo:
            return memo[key]
        if isinstance(t, BackEdge):
            out = target if t.label == label else t
        elif isinstance(t, Node):
            kids = tuple(go(c) for c in t.children)
            if all(a is b for a, b in zip(kids, t.children)):
                out = t
            else:
                out = Node(t.rule, kids)
        elif isinstance(t, RecBind):
            if t.label == label:
                out = t
            else:
                body = go(t.body)
                out = t if body is t.body else RecBind(t.label, body, check=False)
        else:
            out = t
        memo[key] = out
        return out

    return go(t)


def check_guarded(rec):
    """Raise ``UnguardedCycle`` if some path from ``rec`` to one of its back
    edges crosses no coinductive premiss, ``UnboundBackEdge`` never here."""
    seen = set()
    stack = [(rec.body, False)]
    while stack:
        t, guarded = stack.pop()
        key = (id(t), guarded)
        if key in seen:
            continue
        seen.add(key)
        if isinstance(t, BackEdge):
            if t.label == rec.label and not guarded:
                raise UnguardedCycle(f"cycle through '{rec.label}' crosses no coinductive premiss")
        elif isinstance(t, Node):
            for flag, c in zip(t.rule.coind, t.children):
                stack.append((c, guarded or bool(flag)))
        elif isinstance(t, RecBind):
            if t.label != rec.label:
                stack.append((t.body, guarded))


def resolve(t, budget=FORCE_BUDGET):
    """Follow binders and thunks until a ``Node`` is reached."""
    for _ in range(budget):
        if isinstance(t, Node):
            return t
        if isinstance(t, RecBind):
            t = t.unfold()
        elif isinstance(t, Thunk):
            t = t.force()
        elif isinstance(t, BackEdge):
            raise UnboundBackEdge(f"back edge '{t.label}' has no enclosing binder")
        else:
            raise TypeError(f"not a tree: {t!r}")
    raise NonProductive("no node produced within the unfolding budget")


def tree_unfold(t):
    """Expose the root rule and the children of ``t``."""
    n = resolve(t)
    if isinstance(n.rule, Trunc):
        raise DomainError("cannot unfold a truncation axiom")
    return n.rule, n.children


def child_at(t, path):
    """Subtree at a 1-based path, resolving along the way."""
    from .errors import BadPath

    for i in path:
        n = resolve(t)
        if not 1 <= i <= len(n.children):
            raise BadPath(f"no premiss {i} below {n.rule.text()}")
        t = n.children[i - 1]
    return t


def path_depth(t, path):
    """Sum of the coinductive flags crossed along ``path``."""
    from .errors import BadPath

    d = 0
    for i in path:
        n = resolve(t)
        if not 1 <= i <= len(n.children):
            raise BadPath(f"no premiss {i} below {n.rule.text()}")
        d += n.rule.coind[i - 1]
        t = n.children[i - 1]
    return d


# ---------------------------------------------------------------------------
# truncation and the metric


@deep
def truncate(t, d, budget=GRAPH_LIMIT):
    """Finite approximant of ``t`` cut at coinductive depth ``d``."""
    if d < 0:
        raise ValueError("depth must be non-negative")
    memo = {}
    on_path = set()
    count = [0]

    def go(t, d):
        if d == 0:
            return trunc_axiom(t.conclusion)
        n = resolve(t)
        key = (id(n), d)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        if key in on_path:
            raise NonProductive("an inductive cycle was met while truncating")
        count[0] += 1
        if count[0] > budget:
            raise NonProductive("truncation budget exhausted")
        on_path.add(key)
        try:
            kids = [go(c, d - f) for f, c in zip(n.rule.coind, n.children)]
        finally:
            on_path.discard(key)
        out = n if not n.children and d > 0 and not isinstance(n.rule, Hole) else Node(n.rule, kids)
        memo[key] = (n, out)
        return out

    return go(t, d)


@dataclass(frozen=True)
class Distance:
    """A decided distance, or an upper bound when ``exact`` is false."""

    value: Fraction
    exact: bool

    def __str__(self):
        return str(self.value) if self.exact else f"<={self.value}"


def tree_distance(s, t, budget):
    """``inf {2^-d | trunc(s,d) = trunc(t,d)}`` observed up to ``budget``.

    When the truncations first differ at depth ``d`` the distance is
    ``2^-(d-1)``; a difference already at depth 0 (different conclusions)
    gives 2.  If nothing differs up to ``budget`` the result is the bound
    ``2^-budget`` with ``exact`` false.
    """
    for d in range(budget + 1):
        if truncate(s, d) != truncate(t, d):
            return Distance(Fraction(2) ** (1 - d), True)
    return Distance(Fraction(1, 2**budget), False)


# ---------------------------------------------------------------------------
# state graphs and bisimilarity


def state_graph(t, limit=GRAPH_LIMIT, strict=False):
    """Reachable resolved nodes of ``t`` in discovery order."""
    root = _resolve_checked(t, strict)
    seen = {id(root): root}
    order = [root]
    queue = deque([root])
    while queue:
        n = queue.popleft()
        for c in n.children:
            m = _resolve_checked(c, strict)
            if id(m) not in seen:
                if len(seen) >= limit:
                    raise NotRegular(f"more than {limit} states")
                seen[id(m)] = m
                order.append(m)
                queue.append(m)
    return order


def _resolve_checked(t, strict):
    if strict:
        while not isinstance(t, Node):
            if isinstance(t, Thunk):
                raise NotRegular("a lazy subtree was met")
            t = t.unfold() if isinstance(t, RecBind) else resolve(t)
        return t
    return resolve(t)


def bisimilar(s, t, limit=GRAPH_LIMIT, strict=False):
    """Equality of the infinite unfoldings, by pairing state graphs.

    Thunks are forced (memoized thunks make lazy graphs finite in
    practice); ``strict`` raises ``NotRegular`` on any thunk instead.
    """
    seen = set()
    stack = [(s, t)]
    while stack:
        a, b = stack.pop()
        a = _resolve_checked(a, strict)
        b = _resolve_checked(b, strict)
        key = (id(a), id(b))
        if key in seen or a is b:
            continue
        seen.add(key)
        if len(seen) > limit:
            raise NotRegular(f"more than {limit} state pairs")
        if a.rule != b.rule or len(a.children) != len(b.children):
            return False
        stack.extend(zip(a.children, b.children))
    return True


def is_finite(t, limit=GRAPH_LIMIT):
    """True when the unfolding of ``t`` is a finite tree."""
    nodes = state_graph(t, limit)
    index = {id(n): i for i, n in enumerate(nodes)}
    colour = [0] * len(nodes)
    for start in range(len(nodes)):
        if colour[start]:
            continue
        stack = [(start, 0)]
        colour[start] = 1
        while stack:
            i, k = stack.pop()
            kids = nodes[i].children
            if k < len(kids):
                stack.append((i, k + 1))
                j = index[id(resolve(kids[k]))]
                if colour[j] == 1:
                    return False
                if colour[j] == 0:
                    colour[j] = 1
                    stack.append((j, 0))
            else:
                colour[i] = 2
    return True


@deep
def to_syntax(t, limit=GRAPH_LIMIT):
    """Rebuild ``t`` as a thunk-free term with explicit binders.

    Cycles in the resolved graph become ``RecBind``/``BackEdge`` pairs;
    shared acyclic parts are duplicated.
    """
    labels = {}
    used = set()
    for n in state_graph(t, limit):
        used.add(n.rule.name)
    counter = [0]

    def fresh():
        while True:
            counter[0] += 1
            name = f"v{counter[0]}"
            if name not in used:
                used.add(name)
                return name

    closed = {}
    stack_ids = []

    def go(n):
        key = id(n)
        if key in closed:
            return closed[key], frozenset()
        if key in stack_ids:
            if key not in labels:
                labels[key] = fresh()
            return BackEdge(labels[key], n.conclusion), frozenset([labels[key]])
        stack_ids.append(key)
        kids = []
        free = set()
        for c in n.children:
            k, f = go(resolve(c))
            kids.append(k)
            free |= f
        stack_ids.pop()
        out = Node(n.rule, kids)
        if key in labels:
            lab = labels.pop(key)
            out = RecBind(lab, out, check=False)
            free.discard(lab)
        if not free:
            closed[key] = out
        return out, frozenset(free)

    return go(resolve(t))[0]


def lazy_map(t, step, conclusion=None):
    """Corecursive map over the resolved graph of ``t``.

    ``step(node, recurse)`` builds the image of one node; ``recurse(child)``
    returns a memoized thunk for the image of a child, so cyclic inputs give
    cyclic outputs.  ``conclusion(node)`` gives the statement of the image
    (default: unchanged).
    """
    if conclusion is None:
        conclusion = _same_conclusion
    memo = {}

    def recurse(c):
        n = resolve(c)
        k = id(n)
        hit = memo.get(k)
        if hit is not None:
            return hit[1]
        th = Thunk(conclusion(n), lambda n=n: step(n, recurse))
        memo[k] = (n, th)
        return th

    return recurse(t)


def _same_conclusion(n):
    return n.conclusion


# ---------------------------------------------------------------------------
# patterns


class Pattern:
    """A finite tree whose leaves may be holes ``?1 .. ?k``."""

    def __init__(self, tree, arity=None):
        self.tree = tree
        counts = {}
        for n in _finite_nodes(tree):
            if isinstance(n.rule, Hole):
                counts[n.rule.index] = counts.get(n.rule.index, 0) + 1
        k = max(counts, default=0) if arity is None else arity
        self.arity = k
        self.linear = all(counts.get(i, 0) == 1 for i in range(1, k + 1)) and all(
            1 <= i <= k for i in counts
        )
        self.counts = counts

    def __repr__(self):
        return f"Pattern({format_tree(self.tree)})"


def _finite_nodes(t):
    stack = [t]
    while stack:
        n = stack.pop()
        if not isinstance(n, Node):
            raise ValueError("patterns must be finite explicit nodes")
        yield n
        stack.extend(n.children)


def hole(i, statement=UNIT):
    return Node(Hole(i, statement), ())


def pattern_match(p, t):
    """Subtrees of ``t`` under the holes of ``p``, in hole order."""
    if not isinstance(p, Pattern):
        p = Pattern(p)
    if not p.linear:
        raise ValueError("matching needs a linear pattern")
    found = [None] * p.arity

    def go(pn, t):
        if isinstance(pn.rule, Hole):
            if pn.rule.statement != t.conclusion:
                raise Mismatch(f"hole ?{pn.rule.index} expects {pn.rule.statement!r}")
            found[pn.rule.index - 1] = t
            return
        n = resolve(t)
        if n.rule != pn.rule or len(n.children) != len(pn.children):
            raise Mismatch(f"expected {pn.rule.text()}, found {n.rule.text()}")
        for a, b in zip(pn.children, n.children):
            go(a, b)

    go(p.tree, t)
    return found


def pattern_fill(p, children):
    """Replace each hole ``?i`` of ``p`` by ``children[i-1]``.

    Holes may be repeated or missing (templates of right-hand sides).
    """
    if isinstance(p, Pattern):
        k, p = p.arity, p.tree
    else:
        k = None
    children = list(children)
    if k is not None and len(children) != k:
        raise DomainError(f"pattern has {k} holes, got {len(children)} trees")

    def go(pn):
        if isinstance(pn.rule, Hole):
            c = children[pn.rule.index - 1]
            if c.conclusion != pn.rule.statement:
                raise DomainError(
                    f"hole ?{pn.rule.index} expects {pn.rule.statement!r}, got {c.conclusion!r}"
                )
            return c
        if not pn.children:
            return pn
        return Node(pn.rule, [go(c) for c in pn.children])

    return go(p)


# ---------------------------------------------------------------------------
# printing (the parser lives in syntax.py)


def format_tree(t, statement_text=str, unit=UNIT):
    """Text form of a tree; cyclic or lazy trees are printed with binders."""
    if not _is_syntax(t):
        t = to_syntax(t)
    out = []

    def go(t):
        if isinstance(t, BackEdge):
            out.append(t.label)
        elif isinstance(t, RecBind):
            out.append(f"rec {t.label}")
            if t.conclusion is not unit:
                out.append(f" {{{statement_text(t.conclusion)}}}")
            out.append(". ")
            go(t.body)
        else:
            r = t.rule
            if isinstance(r, Trunc):
                out.append("*" if r.statement is unit else f"#{{{statement_text(r.statement)}}}")
                return
            out.append(r.text())
            if t.children:
                out.append("(")
                for i, c in enumerate(t.children):
                    if i:
                        out.append(", ")
                    go(c)
                out.append(")")

    go(t)
    return "".join(out)


def _is_syntax(t):
    stack = [t]
    seen = set()
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        if isinstance(t, Thunk):
            return False
        if isinstance(t, Node):
            stack.extend(t.children)
        elif isinstance(t, RecBind):
            stack.append(t.body)
    return True
