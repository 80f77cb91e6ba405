import pytest
from hypothesis import given, settings, strategies as st

import mugen
from gen import ORDS, fresh_rng, mumall_sources, random_witness, sample
from infrew.compress import Engine
from infrew.core import resolve, truncate
from infrew.errors import DomainError, NotPartitionable, StepNotApplicable, TreeSyntaxError
from infrew.mumall import (
    KINDS,
    CutRel,
    MumallSystem,
    RootStep,
    StuckReport,
    apply_root_step,
    applicable_root_steps,
    check_proof,
    cut_elim_observe,
    format_formula,
    formula_subst,
    fvar,
    is_cut_free,
    neg,
    parse_cutrel,
    parse_formula,
    parse_proof,
    parse_root_step,
    parse_sequent,
    partition_tensor_premisses,
    print_proof,
    reindex_cutrel,
    unfold_fix,
    validate_multicut,
)
from infrew.rewrite import replay, target_truncation, validate_witness

F = parse_formula


def test_formula_text():
    for text in ["A par ~B", "(A tens B) with 0", "mu X. X plus 1", "nu X. (X par bot) tens top"]:
        assert parse_formula(format_formula(F(text))) == F(text)
    assert format_formula(F("A par B par C")) == "A par (B par C)"
    with pytest.raises(ValueError):
        F("A par")


def test_neg_examples():
    assert neg(F("mu X. X plus 1")) == F("nu X. X with bot")
    assert neg(F("A tens ~B")) == F("~A par B")
    assert neg(F("0")) == F("top")
    assert F("~~A") == F("A")


def test_subst_and_unfold():
    body = F("mu X. X plus 1").b
    assert formula_subst(body, F("A"), "X") == F("A plus 1")
    # bound occurrences are left alone
    inner = F("nu Y. mu X. X par Y").b
    assert formula_subst(inner, F("B"), "X") == inner
    assert unfold_fix(F("mu X. X plus 1")) == F("(mu X. X plus 1) plus 1")
    with pytest.raises(DomainError):
        unfold_fix(F("A"))
    assert formula_subst(fvar("X"), F("1"), "X") == F("1")


def test_rule_conclusions():
    cases = {
        "ax[A]": "|- A, ~A",
        "one": "|- 1",
        "top[A, B]": "|- A, B, top",
        "bot(one)": "|- 1, bot",
        "par(ax[A])": "|- A par ~A",
        "tens(one, one)": "|- 1 tens 1",
        "plus[1; A](one)": "|- A plus 1",
        "with(one, one)": "|- 1 with 1",
        "x[2,1](ax[A])": "|- ~A, A",
        "cut(ax[A], ax[~A])": "|- A, ~A",
        "mu[mu X. 1](one)": "|- mu X. 1",
        "mcut[2; 2,2; 1.2~2.2](ax[A], ax[~A])": "|- A, ~A",
    }
    for text, concl in cases.items():
        assert resolve(parse_proof(text)).conclusion == parse_sequent(concl), text


def test_rule_side_conditions():
    for bad in ["cut(ax[A], ax[A])", "with(ax[A], one)", "par(one)", "mu[mu X. X](one)", "x[1,1](ax[A])"]:
        with pytest.raises((DomainError, TreeSyntaxError)):
            parse_proof(bad)


def test_multicut_violations():
    seqs = [parse_sequent("|- A, ~A").formulas, parse_sequent("|- A, ~A").formulas]
    tags = lambda pairs, ns=(2, 2): {v.tag for v in validate_multicut(2, ns, CutRel.of(pairs), seqs)[1]}
    assert tags([((1, 2), (2, 1))]) == set()
    assert tags([((1, 1), (2, 1))]) == {"Duality"}
    assert tags([]) == {"Connectedness"}
    assert tags([((1, 2), (2, 1)), ((1, 1), (2, 2))]) == {"Acyclicity"}
    assert tags([((1, 3), (2, 1))]) >= {"Correctness"}
    assert tags([((1, 2), (2, 1))], (2, 3)) == {"Arity"}
    concl, _ = validate_multicut(2, (2, 2), CutRel.of([((1, 2), (2, 1))]), seqs)
    assert concl == parse_sequent("|- A, ~A")


def test_check_proof_sample():
    p = parse_proof(sample("bad_duality.mumall"), checked=False)
    assert [v.tag for _, v in check_proof(p)] == ["Duality"]
    with pytest.raises(TreeSyntaxError):
        parse_proof(sample("bad_duality.mumall"))


def test_reindex_examples():
    rel = parse_cutrel(["1.2~2.1"])
    pi = {(1, 1): (2, 1), (2, 1): (1, 1), (2, 2): (1, 2)}
    assert reindex_cutrel(pi, rel) == CutRel.of([((1, 1), (2, 2))])
    # pairs with an end outside the image are dropped
    assert len(reindex_cutrel({(1, 1): (1, 2)}, rel)) == 0
    with pytest.raises(ValueError):
        reindex_cutrel({(1, 1): (1, 1), (1, 2): (1, 1)}, rel)


def test_partition_examples():
    # premiss 3 is the tensor with 1 formula on its left side
    rel = CutRel.of([((1, 1), (3, 1)), ((2, 1), (3, 2))])
    assert partition_tensor_premisses(rel, 3, 3, 1) == ([1], [2])
    # premiss 1 hangs off premiss 2, which is on the right
    rel = CutRel.of([((1, 1), (2, 2)), ((2, 1), (3, 2))])
    assert partition_tensor_premisses(rel, 3, 3, 1) == ([], [1, 2])
    rel = CutRel.of([((1, 1), (3, 1)), ((1, 2), (3, 2))])
    with pytest.raises(NotPartitionable):
        partition_tensor_premisses(rel, 3, 3, 1)


def test_root_step_names():
    assert parse_root_step("Perm[2,1]") == RootStep("Perm", (2, 1))
    assert str(parse_root_step("Ax")) == "Ax"
    for bad in ["Nope", "Ax[1]", "Perm"]:
        with pytest.raises(StepNotApplicable):
            parse_root_step(bad)
    assert set(mugen.INSTANCES) == set(KINDS)


def test_bot_one_then_stuck():
    p = parse_proof(sample("bot_one.mumall"))
    assert [s.name for s in applicable_root_steps(p)] == ["BotOne"]
    out = apply_root_step("BotOne", p)
    assert print_proof(out) == "mcut[1; 2](ax[A])"
    # no step removes a multicut over an uncut axiom
    steps, rep = cut_elim_observe(p, 2, fuel=10)
    assert [s.text() for s in steps] == ["BotOne@"]
    assert isinstance(rep, StuckReport) and "no root step" in rep.reason


def test_comm_one_and_tensor_par():
    out = apply_root_step("CommOne", parse_proof("mcut[1; 1](one)"))
    assert print_proof(out) == "one"
    p = parse_proof("mcut[2; 1,2; 1.1~2.2](tens(one, one), par(bot(bot(top[]))))")
    out = apply_root_step("TensorPar", p)
    r = resolve(out).rule
    assert r.k == 3 and len(r.rel) == 2 and resolve(out).conclusion == resolve(p).conclusion


def test_nu_ax_productivity():
    p = parse_proof(sample("nu_ax.mumall"))
    steps, tr = cut_elim_observe(p, 3, fuel=10)
    assert not isinstance(tr, StuckReport)
    assert len(steps) <= 10 and is_cut_free(tr)
    assert print_proof(tr).count("nu[nu X. X]") == 3


def test_non_productive_elimination_runs_out_of_fuel():
    p = parse_proof(sample("loop.mumall"))
    steps, rep = cut_elim_observe(p, 2, fuel=20)
    assert isinstance(rep, StuckReport) and rep.reason == "fuel exhausted"
    names = [s.name for s in steps]
    assert len(names) == 20 and set(names[::2]) == {"Merge"}
    assert all(n.startswith("Perm") for n in names[1::2])


def test_cut_free_proof_needs_no_steps():
    p = parse_proof("rec L {|- nu X. X}. nu[nu X. X](L)")
    steps, tr = cut_elim_observe(p, 3)
    assert steps == [] and tr == truncate(p, 3)


def test_system_step_errors():
    S = MumallSystem()
    with pytest.raises(StepNotApplicable):
        S.apply("TensorPar", resolve(parse_proof("mcut[1; 1](one)")))
    with pytest.raises(StepNotApplicable):
        S.apply("CommOne", resolve(parse_proof("one")))


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=200)
@given(st.integers(0, 10**6))
def test_neg_is_an_involution(seed):
    f = mugen.closed_formula(fresh_rng(seed), 1, 10)
    assert neg(neg(f)) == f
    assert parse_formula(format_formula(f)) == f


@settings(max_examples=300)
@given(st.integers(0, 10**6))
def test_validator_agrees_with_brute_force(seed):
    k, ns, pairs, seqs = mugen.random_instance(fresh_rng(seed))
    ok, concl = mugen.brute_multicut(k, ns, pairs, seqs)
    got, bad = validate_multicut(k, ns, CutRel.of(pairs), seqs)
    assert (got is not None) == ok and got == concl
    assert bool(bad) == (not ok)


@pytest.mark.parametrize("kind", KINDS)
def test_root_steps_preserve_conclusion_and_validity(kind):
    rng = fresh_rng(KINDS.index(kind))
    for _ in range(30):
        t = mugen.INSTANCES[kind](rng)
        if kind == "Perm":
            tau = list(range(1, t.rule.k + 1))
            rng.shuffle(tau)
            step = RootStep("Perm", tuple(tau))
        else:
            step = RootStep(kind)
        out = apply_root_step(step, t)
        assert out.conclusion == t.conclusion
        assert all(mugen.brute_ok(m) for m in mugen.multicuts(out))


PAIR_DELTA = {"Merge": 1, "TensorPar": 1, "Ax": -1, "BotOne": -1, "WithPlus": 0, "MuNu": 0, "Perm": 0}


@pytest.mark.parametrize("kind", sorted(PAIR_DELTA))
def test_root_step_pair_counts(kind):
    rng = fresh_rng(3)
    for _ in range(20):
        t = mugen.INSTANCES[kind](rng)
        step = RootStep("Perm", tuple(range(t.rule.k, 0, -1))) if kind == "Perm" else RootStep(kind)
        out = apply_root_step(step, t)
        after = sum(len(m.rule.rel) for m in mugen.multicuts(out))
        assert after - len(t.rule.rel) == PAIR_DELTA[kind]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_compression_soundness_mumall(seed):
    rng = fresh_rng(seed)
    S = MumallSystem()
    src = rng.choice(mumall_sources(rng, 16))
    w = random_witness(rng, src, S, rng.choice(ORDS), 3, 2)
    assert validate_witness(w, src, S) == []
    e = Engine(S)
    c = e.compress(w, src)
    for d in range(11):
        assert target_truncation(c, d) == target_truncation(w, d)
    steps, cert = e.observe_omega(c, src, 4)
    assert truncate(replay(src, steps, S)[0], 4) == cert == target_truncation(w, 4)
