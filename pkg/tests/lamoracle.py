"""An independent normal-order normalizer on plain tuples.

Terms are ``("v", i)`` (de Bruijn), ``("f", name)``, ``("lam", body)`` and
``("app", fn, arg)``.  Nothing here touches the library's substitution.
"""

from infrew.core import resolve
from infrew.lam import Abs, App, Bound, LVar


def shift(t, d, c=0):
    tag = t[0]
    if tag == "v":
        return ("v", t[1] + d) if t[1] >= c else t
    if tag == "f":
        return t
    if tag == "lam":
        return ("lam", shift(t[1], d, c + 1))
    return ("app", shift(t[1], d, c), shift(t[2], d, c))


def subst(t, s, j=0):
    tag = t[0]
    if tag == "v":
        if t[1] == j:
            return shift(s, j)
        return ("v", t[1] - 1) if t[1] > j else t
    if tag == "f":
        return t
    if tag == "lam":
        return ("lam", subst(t[1], s, j + 1))
    return ("app", subst(t[1], s, j), subst(t[2], s, j))


def step(t):
    """One normal-order step, or None at a normal form."""
    tag = t[0]
    if tag == "app":
        if t[1][0] == "lam":
            return subst(t[1][1], t[2])
        r = step(t[1])
        if r is not None:
            return ("app", r, t[2])
        r = step(t[2])
        return None if r is None else ("app", t[1], r)
    if tag == "lam":
        r = step(t[1])
        return None if r is None else ("lam", r)
    return None


def normalize(t, bound=200, max_size=10_000):
    for _ in range(bound + 1):
        r = step(t)
        if r is None:
            return t
        if size(r) > max_size:
            return None
        t = r
    return None


def size(t):
    if t[0] in ("v", "f"):
        return 1
    if t[0] == "lam":
        return 1 + size(t[1])
    return 1 + size(t[1]) + size(t[2])


def closed_terms(n, k=0):
    """All terms of exactly ``n`` nodes with free indices below ``k``."""
    if n == 1:
        for i in range(k):
            yield ("v", i)
        return
    for b in closed_terms(n - 1, k + 1):
        yield ("lam", b)
    for a in range(1, n - 1):
        for f in closed_terms(a, k):
            for x in closed_terms(n - 1 - a, k):
                yield ("app", f, x)


def to_tree(t, flags):
    from infrew.core import Node

    tag = t[0]
    if tag == "v":
        return Node(Bound(t[1]))
    if tag == "f":
        return Node(LVar(t[1]))
    if tag == "lam":
        return Node(flags.abs(), [to_tree(t[1], flags)])
    return Node(flags.app(), [to_tree(t[1], flags), to_tree(t[2], flags)])


def from_tree(t):
    n = resolve(t)
    r = n.rule
    if isinstance(r, Bound):
        return ("v", r.index)
    if isinstance(r, LVar):
        return ("f", r.name)
    if isinstance(r, Abs):
        return ("lam", from_tree(n.children[0]))
    if isinstance(r, App):
        return ("app", from_tree(n.children[0]), from_tree(n.children[1]))
    raise ValueError(f"not a finite lambda term: {r.text()}")
