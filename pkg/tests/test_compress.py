import pytest
from hypothesis import given, settings, strategies as st

from gen import ORDS, fresh_rng, intro_system, random_tree, random_witness, sample, wide_system
from infrew.compress import Engine, compress_and_observe
from infrew.core import bisimilar, resolve, truncate
from infrew.errors import NonProductive
from infrew.ordinal import OMEGA, ONE
from infrew.rewrite import (
    is_split,
    lift_parts,
    parse_step,
    parse_witness_file,
    refl_hat,
    refl_witness,
    replay,
    split_node,
    target_truncation,
    validate_witness,
)
from infrew.syntax import print_tree

R = intro_system()


def intro():
    return parse_witness_file(sample("intro.witness"), R.lang)


def no_segments(w, limit=2000):
    """Walk the forced part of an omega-witness down to a node budget."""
    seen = 0
    stack = [w]
    while stack and seen < limit:
        n = resolve(stack.pop())
        seen += 1
        if is_split(n):
            if len(n.children) != 1:
                return False
            stack.append(n.children[0])
        else:
            stack.extend(n.children)
    return True


def test_prepone_trivial_cases():
    e = Engine(R)
    t = R.parse("f(a)")
    w = refl_witness(t)
    pre, hat, src = e.prepone_zero_steps(w, t)
    assert pre == [] and bisimilar(src, t)
    w = split_node(0, [[parse_step("r1@1")]], [], refl_hat(R.parse("f(f(g(a)))")))
    pre, hat, src = e.prepone_zero_steps(w, t)
    assert [s.text() for s in pre] == ["r1@1"]


def test_prepone_sequence_without_segments():
    e = Engine(R)
    res = e.prepone_sequence(R.parse("a"), [[parse_step("r1@")]], [], ONE)
    assert [s.text() for s in res.prefix] == ["r1@"] and res.chain == [] and res.epsilon is None


def test_prepone_intro_witness():
    w = intro()
    e = Engine(R)
    pre, hat, src = e.prepone_zero_steps(w.proof, w.source)
    assert [s.text() for s in pre] == ["r1@"]
    gamma, rule, _ = lift_parts(hat)
    assert gamma == ONE and rule.name == "f"
    assert print_tree(target_truncation(hat, 2)) == "f(f(*))"


def test_compress_intro_interleaving():
    w = intro()
    e = Engine(R)
    c = e.compress(w.proof, w.source)
    steps, cert = e.observe_omega(c, w.source, 3)
    texts = [s.text() for s in steps]
    # a -> f(g(a)) -> f(g(f(g(a)))) -> f(f(g(a))) ...
    assert texts[:3] == ["r1@", "r1@1.1", "r2@1"]
    t = R.parse("a")
    seen = []
    for st_ in steps[:3]:
        t, _ = replay(t, [st_], R)
        seen.append(print_tree(truncate(t, 10)))
    assert seen == ["f(g(a))", "f(g(f(g(a))))", "f(f(g(a)))"]
    assert print_tree(cert) == "f(f(f(*)))"


def test_observe_depth_zero_and_refl():
    w = intro()
    steps, cert = compress_and_observe(w.proof, w.source, 0, R)
    assert steps == [] and print_tree(cert) == "*"
    t = R.parse("f(g(f(a)))")
    steps, cert = compress_and_observe(refl_witness(t, OMEGA), t, 4, R)
    assert steps == [] and cert == truncate(t, 4)


def test_compress_is_idempotent_on_omega_witnesses():
    w = intro()
    e = Engine(R)
    c = e.compress(w.proof, w.source)
    cc = Engine(R).compress(c, w.source)
    for d in range(8):
        assert target_truncation(cc, d) == target_truncation(c, d)
        assert e.observe_omega(cc, w.source, d)[0] == e.observe_omega(c, w.source, d)[0]


def test_compress_refl_on_infinite_tree():
    t = R.parse("rec u. f(u)")
    w = refl_witness(t, OMEGA)
    c = Engine(R).compress(w, t)
    assert validate_witness(c, t, R) == []
    assert no_segments(c)
    for d in range(6):
        assert target_truncation(c, d) == target_truncation(w, d)


def test_compressed_witness_has_no_segments_and_validates():
    w = intro()
    c = Engine(R).compress(w.proof, w.source)
    target_truncation(c, 10)
    assert no_segments(c)
    assert validate_witness(c, w.source, R) == []


def test_witness_without_progress_is_non_productive():
    from infrew.core import UNIT, Thunk

    def stuck():
        return Thunk(UNIT, stuck)

    with pytest.raises(NonProductive):
        compress_and_observe(Thunk(UNIT, stuck), R.parse("a"), 2, R)


def test_observed_step_depths_grow():
    w = intro()
    e = Engine(R)
    c = e.compress(w.proof, w.source)
    prev = []
    for d in range(1, 9):
        steps, _ = e.observe_omega(c, w.source, d)
        assert steps[: len(prev)] == prev
        assert all(s.depth >= d - 1 for s in steps[len(prev):])
        prev = steps


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_compression_soundness_fo(seed):
    rng = fresh_rng(seed)
    sys_ = wide_system()
    src = random_tree(rng, rng.randint(1, 7))
    w = random_witness(rng, src, sys_, rng.choice(ORDS))
    e = Engine(sys_)
    c = e.compress(w, src)
    for d in range(11):
        assert target_truncation(c, d) == target_truncation(w, d)
    steps, cert = e.observe_omega(c, src, 6)
    assert cert == target_truncation(w, 6)
    end, _ = replay(src, steps, sys_)
    assert truncate(end, 6) == cert


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_prepone_ordinal_contract(seed):
    rng = fresh_rng(seed)
    sys_ = wide_system()
    src = random_tree(rng, rng.randint(1, 6))
    gamma = rng.choice(ORDS[1:])
    w = random_witness(rng, src, sys_, gamma)
    n = resolve(w)
    res = Engine(sys_).prepone_sequence(src, n.rule.pres, n.children[:-1], gamma)
    assert res.epsilon is None or res.epsilon < gamma
    for h, _ in res.chain:
        assert lift_parts(h)[0] == res.epsilon
