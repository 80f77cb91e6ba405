"""The compression engine: preponement of finite steps and the corecursive
rebuilding of any witness into an omega-witness (all ordinals 0).

The engine is parameterized by a ``System``.  Its preponement step (a step
``t -> t'`` after a witness ``s ->>_d t`` is turned into finite steps from
``s`` followed by a witness at the same ordinal) is generic for systems
whose root steps rewrite a finite linear pattern into a template; systems
such as beta reduction plug in their own ``q_step``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Hole, Pattern, Thunk, deep, resolve, truncate
from .errors import NonProductive, ShapeMismatch, WellFoundednessExhausted
from .ordinal import ZERO, ord_max
from .rewrite import (
    Step,
    concat_hat,
    hat_to_full,
    lift_node,
    lift_parts,
    replay,
    split_node,
    split_parts,
    target,
    weaken_witness,
)


def lift_steps(steps, i, flag):
    return [st.lifted(i, flag) for st in steps]


@dataclass
class Prepone:
    """Finite steps ``prefix`` then a chain of hats, all at ``epsilon``."""

    prefix: list
    chain: list  # [(hat, source)]
    epsilon: object  # None for an empty chain


class Engine:
    """Compression for one system.  Not shared between threads."""

    def __init__(self, system, max_rank=10_000):
        self.system = system
        self.max_rank = max_rank
        self._compressed = {}

    # -- finite steps --------------------------------------------------

    def replay(self, t, steps):
        return replay(t, steps, self.system)

    # -- preponement ---------------------------------------------------

    def prepone_zero_steps(self, w, src):
        """``s ->>_d t`` becomes ``s =>* s'`` and a hat ``s' ->>^_d t``.

        Returns ``(prefix, hat, hat source)``.
        """
        gamma, pres, hats, final = split_parts(w)
        res = self.prepone_sequence(src, pres, hats, gamma)
        hsrc = self.replay(src, res.prefix)[0]
        cur = final
        for hat, _ in reversed(res.chain):
            cur = concat_hat(hat, cur)
        return res.prefix, cur, hsrc

    def prepone_sequence(self, src, pres, hats, gamma, rank=0):
        """Preponement of a segmented reduction ``s ~>^{g,m} s'``.

        The last segment is peeled: its trailing steps are pushed through
        it one by one, the new finite steps join the previous step list,
        and the shorter sequence is handled recursively.
        """
        if rank > self.max_rank:
            raise WellFoundednessExhausted("preponement recursion too deep")
        m = len(hats)
        if m == 0:
            return Prepone(list(pres[0]), [], None)
        srcs = []
        cur = src
        for i in range(m):
            cur = self.replay(cur, pres[i])[0]
            srcs.append(cur)
            cur = target(hats[i])
        hat, hsrc = hats[-1], srcs[-1]
        extra = []
        for st in pres[m]:
            pre, hat, hsrc = self.q_prime(hat, hsrc, st)
            extra.extend(pre)
        new_pres = list(pres[: m - 1]) + [tuple(pres[m - 1]) + tuple(extra)]
        res = self.prepone_sequence(src, new_pres, hats[: m - 1], gamma, rank + 1)
        delta_m = lift_parts(hat)[0]
        eps = delta_m if res.epsilon is None else ord_max(res.epsilon, delta_m)
        if not eps < gamma:
            raise ShapeMismatch(f"segment ordinal {eps} is not below {gamma}")
        chain = [(weaken_witness(h, eps), s) for h, s in res.chain] + [(weaken_witness(hat, eps), hsrc)]
        return Prepone(res.prefix, chain, eps)

    def q_prime(self, hat, hsrc, st):
        """One step after a hat: ``(prefix, new hat, new hat source)``."""
        pre, full = self.q_step(hat_to_full(hat), hsrc, st)
        src2 = self.replay(hsrc, pre)[0]
        pre2, hat2, hsrc2 = self.prepone_zero_steps(full, src2)
        return list(pre) + list(pre2), hat2, hsrc2

    # -- the property Q ------------------------------------------------

    def q_step(self, w, src, st):
        """A witness ``s ->>_d t`` and a step ``t -> t'`` give finite steps
        ``s =>* s'`` and a witness ``s' ->>_d t'``."""
        custom = getattr(self.system, "q_step", None)
        if custom is not None:
            return custom(self, w, src, st)
        if st.path:
            return self.congruence_q_step(w, src, st)
        return self.pattern_q_step(w, src, st)

    def congruence_q_step(self, w, src, st):
        pre, hat, hsrc = self.prepone_zero_steps(w, src)
        gamma, rule, kids = lift_parts(hat)
        i = st.path[0]
        flag = rule.coind[i - 1]
        sub = Step(st.path[1:], st.name, None)
        child_src = resolve(hsrc).children[i - 1]
        pre_i, kid = self.q_step(kids[i - 1], child_src, sub)
        kids = list(kids)
        kids[i - 1] = kid
        new_hat = lift_node(gamma, rule, kids)
        return list(pre) + lift_steps(pre_i, i, flag), hat_to_full(new_hat)

    def pattern_q_step(self, w, src, st):
        t = target(w)
        self.system.apply(st.name, resolve(t))  # raises StepNotApplicable
        p, q = self.system.root_rewrite(t, st.name)
        pre, parts = self.extract(w, src, p)
        filled = self.fill(q, [pw for pw, _ in parts], ord_of(w))
        root = Step((), st.name, 0)
        return list(pre) + [root], filled

    def extract(self, w, src, p):
        """Pattern extraction for a finite linear pattern ``p``.

        Returns ``(prefix, [(witness, source)] per hole)`` with the prefix
        reaching ``p(sources)`` from ``src``.
        """
        if isinstance(p, Pattern):
            p = p.tree
        found = {}
        prefix = self._extract(w, src, p, found, [])
        parts = [found[i] for i in sorted(found)]
        return prefix, parts

    def _extract(self, w, src, pn, found, path):
        if isinstance(pn.rule, Hole):
            found[pn.rule.index] = (w, src)
            return []
        pre, hat, hsrc = self.prepone_zero_steps(w, src)
        gamma, rule, kids = lift_parts(hat)
        if rule != pn.rule or len(kids) != len(pn.children):
            raise ShapeMismatch(f"expected {pn.rule.text()}, the witness lifts {rule.text()}")
        out = list(pre)
        h = resolve(hsrc)
        for i, (kid, sub) in enumerate(zip(kids, pn.children), 1):
            flag = rule.coind[i - 1]
            out.extend(lift_steps(self._extract(kid, h.children[i - 1], sub, found, path + [i]), i, flag))
        return out

    def fill(self, q, witnesses, gamma):
        """Pattern filling: lift the template ``q`` over the given witnesses.

        ``q`` may be cyclic; each of its nodes becomes a lift at ``gamma``.
        """
        if isinstance(q, Pattern):
            q = q.tree
        memo = {}

        def go(t):
            n = resolve(t)
            if isinstance(n.rule, Hole):
                return witnesses[n.rule.index - 1]
            hit = memo.get(id(n))
            if hit is not None:
                return hit[1]
            th = Thunk(n.conclusion, lambda: hat_to_full(lift_node(gamma, n.rule, [go(c) for c in n.children])))
            memo[id(n)] = (n, th)
            return th

        return go(q)

    # -- compression ---------------------------------------------------

    def compress(self, w, src):
        """A lazily built omega-witness with the same source and target."""
        wn, sn = resolve(w), resolve(src)
        key = (id(wn), id(sn))
        hit = self._compressed.get(key)
        if hit is not None:
            return hit[2]
        th = Thunk(wn.conclusion, lambda: self._compress_node(wn, sn))
        self._compressed[key] = (wn, sn, th)
        return th

    def _compress_node(self, w, src):
        pre, hat, hsrc = self.prepone_zero_steps(w, src)
        _, rule, kids = lift_parts(hat)
        h = resolve(hsrc)
        new_kids = [self.compress(k, c) for k, c in zip(kids, h.children)]
        return split_node(ZERO, (tuple(pre),), [], lift_node(ZERO, rule, new_kids))

    def observe_omega(self, w, src, d, fuel=100_000):
        """Finite steps from ``src`` reaching agreement with the target of
        the omega-witness ``w`` at depth ``d``, and that truncation."""
        return _observe(self, w, src, d, fuel)


@deep
def _observe(engine, w, src, d, fuel):
    count = [0]

    def go(w, d):
        if d <= 0:
            return []
        count[0] += 1
        if count[0] > fuel:
            raise NonProductive("observation fuel exhausted")
        gamma, pres, hats, final = split_parts(w)
        if hats:
            raise ShapeMismatch("an omega-witness has no segments")
        steps = list(pres[0])
        _, rule, kids = lift_parts(final)
        for i, (f, k) in enumerate(zip(rule.coind, kids), 1):
            steps.extend(lift_steps(go(k, d - f), i, f))
        return steps

    steps = go(w, d)
    end, steps = engine.replay(src, steps)
    return steps, truncate(end, d)


def ord_of(w):
    return resolve(w).rule.gamma


@deep
def compress(w, src, system):
    """Compress ``w`` (from ``src``); see ``Engine.compress``."""
    return Engine(system).compress(w, src)


@deep
def observe_omega(w, src, d, system, fuel=100_000):
    return Engine(system).observe_omega(w, src, d, fuel)


@deep
def compress_and_observe(w, src, d, system, fuel=100_000):
    e = Engine(system)
    return e.observe_omega(e.compress(w, src), src, d, fuel)
