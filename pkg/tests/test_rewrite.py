import pytest
from hypothesis import given, settings, strategies as st

from gen import INTRO_TRS, ORDS, fresh_rng, intro_system, random_hat, random_tree, random_witness, sample, wide_system
from infrew.core import bisimilar, truncate
from infrew.errors import BadPath, EndpointMismatch, OrdinalNotLarger, StepNotApplicable
from infrew.fo import parse_trs
from infrew.ordinal import OMEGA, ONE, ZERO, Ordinal, ord_max_succ
from infrew.rewrite import (
    Step,
    apply_step,
    concat_hat,
    gamma_of,
    hat_to_full,
    is_lift,
    is_split,
    lift_node,
    parse_step,
    parse_witness_file,
    print_witness,
    parse_witness,
    reduce,
    refl_hat,
    refl_witness,
    replay,
    split_node,
    split_parts,
    target,
    target_truncation,
    validate_witness,
    weaken_witness,
)
from infrew.syntax import print_tree

R = intro_system()
T = R.parse


def tags(vs):
    return {v.tag for v in vs}


# ---------------------------------------------------------------------------
# steps


def test_apply_step_examples():
    out, st_ = apply_step(T("a"), parse_step("r1@"), R)
    assert bisimilar(out, T("f(g(a))")) and st_.depth == 0
    out, st_ = apply_step(T("f(g(f(g(a))))"), parse_step("r2@1"), R)
    assert bisimilar(out, T("f(f(g(a)))")) and st_.depth == 1
    with pytest.raises(BadPath):
        apply_step(T("a"), parse_step("r1@1"), R)
    with pytest.raises(StepNotApplicable):
        apply_step(T("f(a)"), parse_step("r2@"), R)


def test_parse_step():
    assert parse_step("r1@1.2.1") == Step((1, 2, 1), "r1")
    assert parse_step("beta@") == Step((), "beta")
    for bad in ["r1", "r1@0", "r1@1..2"]:
        with pytest.raises(ValueError):
            parse_step(bad)


def test_reduce_leftmost_outermost():
    t, trace = reduce(T("a"), R, 4)
    assert [s.text() for s in trace] == ["r1@", "r1@1.1", "r2@1", "r1@1.1.1"]
    assert print_tree(truncate(t, 3)) == "f(f(g(*)))"
    t, trace = reduce(T("a"), R, 5)
    assert print_tree(truncate(t, 3)) == "f(f(f(*)))"
    t, trace = reduce(T("a"), R, 0)
    assert trace == [] and t == T("a")


names = st.sampled_from(["f", "g"])


@given(st.lists(names, max_size=8))
def test_depth_is_sum_of_flags(path_syms):
    # f's premiss is inductive, g's is coinductive; the redex sits below
    sys_ = parse_trs("sig f/1 g/1 a/0 b/0 ; inductive f.1 ; a -> b ;")
    text = "".join(c + "(" for c in path_syms) + "a" + ")" * len(path_syms)
    _, st_ = apply_step(sys_.parse(text), Step((1,) * len(path_syms), "r1"), sys_)
    assert st_.depth == path_syms.count("g")


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_replay_reproduces_trailing_steps(seed):
    from gen import random_steps

    rng = fresh_rng(seed)
    sys_ = wide_system()
    src = random_tree(rng, rng.randint(1, 7))
    end, steps = random_steps(rng, src, sys_, rng.randint(0, 5))
    assert bisimilar(replay(src, steps, sys_)[0], end)


# ---------------------------------------------------------------------------
# basic lemmas


def test_refl_examples():
    from infrew.core import resolve

    h = resolve(refl_hat(T("x")))
    assert is_lift(h) and h.children == ()
    t = T("rec u. f(u)")
    w = refl_witness(t, OMEGA)
    assert validate_witness(w, t, R) == []
    assert print_tree(target_truncation(w, 3)) == "f(f(f(*)))"
    w = refl_witness(T("f(g(a))"), 2)
    assert validate_witness(w, T("f(g(a))"), R) == []
    assert bisimilar(target_truncation(w, 5), T("f(g(a))"))


def test_weaken_examples():
    w = refl_witness(T("a"))
    assert weaken_witness(w, 0) is not None
    w1 = refl_witness(T("f(a)"), 1)
    w2 = weaken_witness(w1, OMEGA)
    assert gamma_of(w2) == OMEGA
    assert validate_witness(w2, T("f(a)"), R) == []
    with pytest.raises(OrdinalNotLarger):
        weaken_witness(refl_witness(T("a"), OMEGA), 2)


def test_concat_examples():
    t = T("f(g(a))")
    h = refl_hat(t, 1)
    both = concat_hat(refl_hat(t, 0), h)
    assert gamma_of(both) == ord_max_succ(0, 1)
    assert validate_witness(hat_to_full(both), t, R) == []
    assert bisimilar(target_truncation(both, 6), t)
    back = concat_hat(h, refl_hat(t, 0))
    assert gamma_of(back) == Ordinal.of(2)
    with pytest.raises(EndpointMismatch):
        concat_hat(refl_hat(T("f(a)")), refl_hat(T("g(a)")))


def test_hat_to_full():
    h = lift_node(0, T("x").rule, [])
    w = hat_to_full(h)
    gamma, pres, hats, final = split_parts(w)
    assert pres == ((),) and hats == () and final is h
    assert validate_witness(w, T("x"), R) == []


def test_intro_witness_targets():
    w = parse_witness_file(sample("intro.witness"), R.lang)
    assert validate_witness(w.proof, w.source, R) == []
    assert w.gamma == ONE
    for d in range(6):
        assert print_tree(target_truncation(w.proof, d)) == "f(" * d + "*" + ")" * d


def test_witness_text_roundtrip():
    w = parse_witness_file(sample("intro.witness"), R.lang)
    text = print_witness(w.proof, R.lang)
    again = parse_witness(text, R.lang)
    assert bisimilar(again, w.proof)
    assert print_witness(again, R.lang) == text


# ---------------------------------------------------------------------------
# validation


def test_validator_accepts_refl_at_any_ordinal():
    for g in ORDS:
        assert validate_witness(refl_witness(T("f(g(a))"), g), T("f(g(a))"), R) == []


def test_validator_rejects_segment_at_gamma():
    w = parse_witness_file(sample("bad_ordinal.witness"), R.lang)
    assert "ordinal-violation" in tags(validate_witness(w.proof, w.source, R))


def test_validator_rejects_endpoint_mismatch():
    w = parse_witness_file(sample("bad_endpoint.witness"), R.lang)
    assert "endpoint-mismatch" in tags(validate_witness(w.proof, w.source, R))


def test_validator_rejects_unguarded_cycle():
    ind = parse_trs(sample("intro_inductive.trs"))
    w = parse_witness_file(sample("unguarded.witness"), ind.lang)
    assert "unguarded-cycle" in tags(validate_witness(w.proof, w.source, ind))
    # the same cycle is guarded when the premiss of f is coinductive, but
    # the witness then claims a -> f(f(...)) without steps
    w = parse_witness_file(sample("unguarded.witness"), R.lang)
    assert tags(validate_witness(w.proof, w.source, R)) == {"endpoint-mismatch"}


def test_target_truncation_unguarded_is_non_productive():
    from infrew.errors import NonProductive

    ind = parse_trs(sample("intro_inductive.trs"))
    w = parse_witness_file(sample("unguarded.witness"), ind.lang)
    with pytest.raises(NonProductive):
        target_truncation(w.proof, 2)


def test_validator_rejects_bad_steps():
    w = split_node(0, [[parse_step("r2@")]], [], refl_hat(T("a")))
    assert "step-not-applicable" in tags(validate_witness(w, T("a"), R))


# ---------------------------------------------------------------------------
# properties over generated witnesses


def chain3(rng, sys_):
    src = random_tree(rng, rng.randint(1, 6))
    hats = []
    cur = src
    for _ in range(3):
        h = random_hat(rng, cur, sys_, rng.choice(ORDS), 3)
        hats.append(h)
        cur = target(h)
    return src, hats


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_concat_associative_on_targets(seed):
    rng = fresh_rng(seed)
    sys_ = wide_system()
    src, (h1, h2, h3) = chain3(rng, sys_)
    left = concat_hat(concat_hat(h1, h2), h3)
    right = concat_hat(h1, concat_hat(h2, h3))
    for w in (left, right):
        assert validate_witness(hat_to_full(w), src, sys_) == []
    for d in range(11):
        assert target_truncation(left, d) == target_truncation(right, d) == target_truncation(h3, d)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_generated_witnesses_validate_and_weaken(seed):
    rng = fresh_rng(seed)
    sys_ = wide_system()
    src = random_tree(rng, rng.randint(1, 6))
    g = rng.choice(ORDS)
    w = random_witness(rng, src, sys_, g)
    assert validate_witness(w, src, sys_) == []
    big = weaken_witness(w, OMEGA * 3)
    assert validate_witness(big, src, sys_) == []
    for d in range(16):
        assert target_truncation(big, d) == target_truncation(w, d)
