"""Ordinals below epsilon_0 in Cantor normal form.

An ordinal is a tuple of ``(exponent, coefficient)`` terms with strictly
decreasing exponents, each exponent itself an :class:`Ordinal`.
"""

from __future__ import annotations

import re
from functools import total_ordering

LT, EQ, GT = -1, 0, 1


@total_ordering
class Ordinal:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms=()):
        terms = tuple(terms)
        for i, (e, c) in enumerate(terms):
            if not isinstance(e, Ordinal):
                raise TypeError("exponents must be ordinals")
            if not isinstance(c, int) or c < 1:
                raise ValueError("coefficients must be positive integers")
            if i and _cmp(terms[i - 1][0], e) != GT:
                raise ValueError("exponents must be strictly decreasing")
        self.terms = terms
        self._hash = None

    @classmethod
    def of(cls, n: int | Ordinal) -> Ordinal:
        if isinstance(n, Ordinal):
            return n
        if n < 0:
            raise ValueError("ordinals are non-negative")
        return ZERO if n == 0 else cls(((ZERO, n),))

    @classmethod
    def omega_power(cls, e, coefficient=1) -> Ordinal:
        return cls(((cls.of(e), coefficient),))

    def __eq__(self, other):
        if isinstance(other, int):
            other = Ordinal.of(other) if other >= 0 else None
        if not isinstance(other, Ordinal):
            return NotImplemented
        return self.terms == other.terms

    def __lt__(self, other):
        if isinstance(other, int):
            other = Ordinal.of(other)
        if not isinstance(other, Ordinal):
            return NotImplemented
        return _cmp(self, other) == LT

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def is_finite(self):
        return not self.terms or (len(self.terms) == 1 and not self.terms[0][0])

    def is_limit(self):
        return bool(self.terms) and bool(self.terms[-1][0])

    def __int__(self):
        if not self.is_finite():
            raise ValueError(f"{self} is infinite")
        return self.terms[0][1] if self.terms else 0

    def __add__(self, other):
        other = Ordinal.of(other)
        if not other.terms:
            return self
        lead_e, lead_c = other.terms[0]
        kept = []
        for e, c in self.terms:
            rel = _cmp(e, lead_e)
            if rel == GT:
                kept.append((e, c))
            elif rel == EQ:
                return Ordinal(kept + [(e, c + lead_c)] + list(other.terms[1:]))
            else:
                break
        return Ordinal(kept + list(other.terms))

    def __radd__(self, other):
        return Ordinal.of(other) + self

    def __mul__(self, n):
        # right multiplication by a natural number only
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        if n == 0 or not self.terms:
            return ZERO
        (e, c), rest = self.terms[0], self.terms[1:]
        return Ordinal(((e, c * n),) + rest)

    def succ(self):
        return self + 1

    def __repr__(self):
        return f"Ordinal({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            if not e:
                parts.append(str(c))
                continue
            if e == ONE:
                base = "ω"
            elif e.is_finite() or (len(e.terms) == 1 and e.terms[0][1] == 1 and e.terms[0][0] == ONE):
                base = f"ω^{e}"
            else:
                base = f"ω^({e})"
            parts.append(base if c == 1 else f"{base}·{c}")
        return "+".join(parts)


def _cmp(a: Ordinal, b: Ordinal) -> int:
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        rel = _cmp(ea, eb)
        if rel != EQ:
            return rel
        if ca != cb:
            return LT if ca < cb else GT
    if len(a.terms) == len(b.terms):
        return EQ
    return LT if len(a.terms) < len(b.terms) else GT


ZERO = Ordinal()
ONE = Ordinal(((ZERO, 1),))
OMEGA = Ordinal(((ONE, 1),))


def ord_compare(a, b) -> int:
    """Return ``LT``, ``EQ`` or ``GT`` (-1, 0, 1)."""
    return _cmp(Ordinal.of(a), Ordinal.of(b))


def ord_max_succ(a, b) -> Ordinal:
    """``max(a + 1, b)``: the ordinal of a concatenated hat witness."""
    s = Ordinal.of(a).succ()
    b = Ordinal.of(b)
    return s if _cmp(s, b) != LT else b


def ord_max(*xs) -> Ordinal:
    out = ZERO
    for x in xs:
        x = Ordinal.of(x)
        if _cmp(x, out) == GT:
            out = x
    return out


_TOKEN = re.compile(r"\s*(?:(\d+)|(ω|w|omega)|(\^)|([·*.])|(\+)|(\()|(\)))")


def parse_ordinal(text: str) -> Ordinal:
    """Parse ``3``, ``w``, ``ω·2+1``, ``w^2*3+w``, ``w^(w+1)``."""
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"bad ordinal syntax: {text!r}")
        pos = m.end()
        kind = m.lastindex
        toks.append((kind, m.group(kind)))
    toks.append((0, None))
    i = 0

    def peek():
        return toks[i][0]

    def take(kind):
        nonlocal i
        if toks[i][0] != kind:
            raise ValueError(f"bad ordinal syntax: {text!r}")
        i += 1
        return toks[i - 1][1]

    def sum_():
        out = term()
        while peek() == 5:
            take(5)
            out = out + term()
        return out

    def term():
        out = atom()
        while peek() == 4:
            take(4)
            out = out * int(take(1))
        return out

    def atom():
        if peek() == 1:
            return Ordinal.of(int(take(1)))
        if peek() == 6:
            take(6)
            out = sum_()
            take(7)
            return out
        take(2)
        if peek() == 3:
            take(3)
            return Ordinal.omega_power(atom())
        return OMEGA

    out = sum_()
    if peek() != 0:
        raise ValueError(f"bad ordinal syntax: {text!r}")
    return out
