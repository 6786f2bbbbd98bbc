import os
import re
import shutil
import subprocess

import pytest

from conftest import load_model
from direct_eval import holds, member
from logic_corpus import QUERIES, SECTION_61, agrees, aux_model, build
from shuffle.errors import BudgetExceeded, SolverUnavailable, UnsupportedConstraint
from shuffle.logic import (CachingSolver, EnumerativeSolver, ExternalSolver, LogicQuery,
                           RecordingSolver, SymbolicCtx, check_base_case, check_implication,
                           check_set_disjoint, check_set_equiv, check_valid_infer,
                           emit_smtlib, obligations, solve_enumerative, solve_external,
                           stratification_order)
from shuffle.logic.smt import PROVER_ENV, prover_path
from shuffle.surface import parse_constraint as C
from shuffle.surface import parse_varsets as V
from shuffle.surface import syntax as S

HAVE_PROVER = prover_path() is not None
needs_prover = pytest.mark.skipif(not HAVE_PROVER, reason="no SMT prover on PATH")


@pytest.fixture(scope="module")
def models():
    return load_model(), aux_model()


@pytest.fixture
def people(models):
    return SymbolicCtx(models[0]).bind("p", "People")


def genuine(entry, verdict, query):
    """The witness violates the query under direct evaluation of the surface AST."""
    w = verdict.witness
    model = query.ctx.model
    kind, args = query.kind, query.args
    if kind == "Implication":
        return holds(args[0], w, model) and not holds(args[1], w, model)
    var = re.search(r"\[(\w+)\]", verdict.obligation.label).group(1)
    extra = [q for q in w["quantifiers"] if q not in query.ctx.gamma and q != "p"]
    n = w["quantifiers"][extra[0]] if extra else 0
    if kind == "SetEquiv":
        return member(args[0], var, n, w, model) != member(args[1], var, n, w, model)
    if kind == "SetDisjoint":
        return member(args[0], var, n, w, model) and member(args[1], var, n, w, model)
    if kind == "BaseCase":
        q, dom, sets = args
        return (w["quantifiers"][q] < w["bounds"][dom][0]
                and member(sets, var, n, w, model))
    raise AssertionError(kind)


# ---------------------------------------------------------------- the corpus

@pytest.mark.parametrize("entry", QUERIES, ids=[q[0] for q in QUERIES])
def test_enumerative_verdict(entry, models):
    v = solve_enumerative(build(entry, *models), 6)
    assert agrees(v, entry[4]), v


@needs_prover
@pytest.mark.parametrize("entry", QUERIES, ids=[q[0] for q in QUERIES])
def test_prover_verdict(entry, models):
    q = build(entry, *models)
    v, e = solve_external(q), solve_enumerative(q, 6)
    assert agrees(v, entry[4]), v
    assert not (v.kind == "Valid" and e.kind == "CounterExample")


@pytest.mark.parametrize("entry", [q for q in QUERIES if q[4] == "invalid"],
                         ids=[q[0] for q in QUERIES if q[4] == "invalid"])
def test_counterexamples_are_genuine(entry, models):
    q = build(entry, *models)
    v = solve_enumerative(q, 6)
    assert genuine(entry, v, q), v.witness


def test_section_61_valid_on_both_paths(people):
    A, B = V(SECTION_61[0]), V(SECTION_61[1])
    assert check_set_equiv(people, A, B).kind == "ValidUpToBound"
    assert solve_enumerative(LogicQuery("SetEquiv", people, (A, B)), 8).valid
    if HAVE_PROVER:
        assert check_set_equiv(people, A, B, solver=ExternalSolver()).kind == "Valid"


# ---------------------------------------------------------------- operations

def test_implication_examples(people):
    ctx = people.bind("i", "People")
    assert check_implication(ctx, C("i <= p-1"), C("i < p")).valid
    assert check_implication(ctx, C("i < p && i > 0"), C("i < p && i > 0")).valid
    v = check_implication(ctx, C("i < p"), C("i < p-1"))
    assert v.kind == "CounterExample"
    assert v.witness["quantifiers"]["i"] == v.witness["quantifiers"]["p"] - 1


def test_small_cap_still_finds_counterexample(people):
    ctx = people.bind("i", "People")
    q = LogicQuery("Implication", ctx, (C("i < p"), C("i < p-1")))
    assert solve_enumerative(q, 2).kind == "CounterExample"


def test_set_equiv_counterexample_at_p(people):
    v = check_set_equiv(people, V("calls{i in People: i < p}"), V("calls{i in People: i <= p}"))
    assert v.kind == "CounterExample"
    q = v.witness["quantifiers"]
    assert q["i"] == q["p"]


def test_set_equiv_is_an_equivalence(people):
    sets = [V("calls{i in People: i <= p-1}"), V("calls{i in People: i < p}"),
            V("calls{i in People: i < p && i >= min(People)}"), V("calls{i in People: i <= p}")]
    eq = [[check_set_equiv(people, a, b).valid for b in sets] for a in sets]
    for i in range(len(sets)):
        assert eq[i][i]
        for j in range(len(sets)):
            assert eq[i][j] == eq[j][i]
            for k in range(len(sets)):
                if eq[i][j] and eq[j][k]:
                    assert eq[i][k]
    assert eq[0][1] and eq[1][2] and not eq[0][3]


def test_disjointness_examples(models, people):
    ctx = SymbolicCtx(models[0])
    assert check_set_disjoint(ctx, V("alarm"), V("burglary, earthquake")).valid
    assert check_set_disjoint(ctx, V("calls"), V("calls")).kind == "CounterExample"
    assert check_set_disjoint(people, V("calls{i in People: i < p}"),
                              V("calls{i in People: i >= p}")).valid


def test_valid_infer_examples(models):
    ctx = SymbolicCtx(models[0]).bind("j", "Bool")
    v = check_valid_infer(ctx, V("calls{i0 in People: calls[i0] == j}"), V("alarm"))
    assert (v.kind, v.condition) == ("Violation", "computable-targets")
    assert check_valid_infer(ctx, V("calls"), V("alarm")).valid
    aux = SymbolicCtx(models[1])
    assert check_valid_infer(aux, V("y"), V("x{i in Dom: z[i] == 1}, z")).valid
    v = check_valid_infer(aux, V("y"), V("x{i in Dom: z[i] == 1}, z{i in Dom: x[i] == 1}"))
    assert v.condition == "stratified"


def test_stratification_order(models):
    aux = SymbolicCtx(models[1])
    assert stratification_order(aux, V("x{i in Dom: z[i] == 1}, z")) == ["z", "x"]
    assert stratification_order(aux, V("x{i in Dom: z[i] == 1}, z{i in Dom: x[i] == 1}")) is None


def test_base_case_examples(models):
    ctx = SymbolicCtx(models[0])
    assert check_base_case(ctx, "p", "People", V("calls{i in People: i <= p}")).valid
    assert check_base_case(ctx, "p", "People", V("calls{i in People: i < p}")).valid
    assert check_base_case(ctx, "p", "People", V("burglary")).kind == "CounterExample"


def test_real_read_is_unsupported():
    m = load_model("normal_mean.shm")
    ctx = SymbolicCtx(m)
    with pytest.raises(UnsupportedConstraint):
        check_implication(ctx, C("mu == 1"), C("true"))


def test_budget_exceeded(people):
    ctx = people.bind("i", "People")
    with pytest.raises(BudgetExceeded):
        check_implication(ctx, C("i < p"), C("i <= p"), solver=EnumerativeSolver(6, ceiling=10))


def test_recording_and_caching(people):
    rec = RecordingSolver(CachingSolver(EnumerativeSolver(4)))
    A, B = V(SECTION_61[0]), V(SECTION_61[1])
    check_set_equiv(people, A, B, solver=rec)
    check_set_equiv(people, A, B, solver=rec)
    assert len(rec.log) == 2
    assert rec.log[0][0] == rec.log[1][0]
    assert len(rec.inner.cache) == 1


# ---------------------------------------------------------------- SMT-LIB

def test_section_61_script(people):
    q = LogicQuery("SetEquiv", people, (V(SECTION_61[0]), V(SECTION_61[1])))
    text = emit_smtlib(q)
    assert "(_ BitVec 64)" in text
    assert "(check-sat)" in text.strip().splitlines()[-1]
    assert "bvsle |People_min| |p|" in text
    assert "(i <= p - 1) != (i < p)" in text


def test_tautology_script_is_unsat(models):
    q = LogicQuery("Implication", SymbolicCtx(models[0]), (S.TRUE, S.TRUE))
    text = emit_smtlib(q)
    assert "(assert (not true))" in text
    if HAVE_PROVER:
        out = subprocess.run([prover_path(), "-in"], input=text, capture_output=True,
                             text=True, timeout=30)
        assert out.stdout.strip() == "unsat"


@needs_prover
def test_prover_accepts_every_script(models):
    for entry in QUERIES:
        q = build(entry, *models)
        for ob in obligations(q):
            out = subprocess.run([prover_path(), "-in"], input=emit_smtlib(ob),
                                 capture_output=True, text=True, timeout=30)
            assert out.stdout.split()[0] in ("sat", "unsat"), (entry[0], out.stdout)
            assert "error" not in out.stdout


def test_missing_prover(people):
    with pytest.raises(SolverUnavailable):
        check_set_equiv(people, V("calls"), V("calls{i in People: i < p}"),
                        solver=ExternalSolver("/nonexistent/prover"))


def test_unknown_answer_is_not_valid(people, tmp_path):
    fake = tmp_path / "prover"
    fake.write_text("#!/bin/sh\ncat > /dev/null\necho unknown\n")
    fake.chmod(0o755)
    with pytest.raises(SolverUnavailable):
        check_set_equiv(people, V("calls"), V("calls{i in People: i < p}"),
                        solver=ExternalSolver(str(fake)))


def test_prover_from_environment(people, monkeypatch, tmp_path):
    monkeypatch.setenv(PROVER_ENV, str(tmp_path / "missing"))
    with pytest.raises(SolverUnavailable):
        ExternalSolver().check(obligations(LogicQuery(
            "SetEquiv", people, (V("calls"), V("calls{i in People: i < p}"))))[0])
    if shutil.which("z3"):
        monkeypatch.setenv(PROVER_ENV, shutil.which("z3"))
        assert os.path.samefile(prover_path(), shutil.which("z3"))
