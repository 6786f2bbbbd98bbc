import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import corpus_text, load_defs, load_model
from direct_eval import index_value, member
from mutations import MUTATIONS
from shuffle.errors import ModelError, ShuffleTypeError
from shuffle.surface import parse_inference, parse_model, parse_term, parse_type, resolve_model
from shuffle.surface import syntax as S
from shuffle.surface.subst import substitute
from shuffle.typecheck import (AssumptionLog, DistType, Independence, ReachesAll, check_model,
                               TypeEnv, check_program, coerce, coerce_independent,
                               infer_type)

PROGRAMS = [
    ("burglary.shm", ("burglary_exact.shi",)),
    ("burglary.shm", ("burglary_prelude.shi", "burglary_gibbs.shi")),
    ("burglary.shm", ("burglary_prelude.shi", "burglary_lw.shi")),
    ("burglary.shm", ("grammar_coverage.shi",)),
    ("normal_mean.shm", ("normal_mean.shi",)),
    ("dirichlet.shm", ("dirichlet.shi",)),
]


@pytest.fixture(scope="module")
def model():
    return load_model()


def ty(text):
    return parse_type(text)


def same(model, t1, t2):
    return coerce(model, t1, t2) and coerce(model, t2, t1)


# ---------------------------------------------------------------- models

def test_burglary_model_schedule(model):
    result = check_model(model)
    assert result.schedule_text() == ["burglaryPrior", "earthquakePrior", "alarmDens",
                                      "callDens(p) for p in People"]
    assert result.verified == ["burglaryPrior", "earthquakePrior", "alarmDens", "callDens"]
    assert result.assumptions == []


@pytest.mark.parametrize("name", ["normal_mean.shm", "dirichlet.shm"])
def test_other_models_are_valid(name):
    assert check_model(load_model(name)).schedule


def test_self_contained_violation():
    m = resolve_model(parse_model("""
    model {
       variable Bool a;
       variable Bool b;
       def aDens() : density(a) = if (b == 1) { flip(a, 0.3) } else { flip(a, 0.6) };
       def bDens() : density(b) = flip(b, 0.5);
    }"""))
    with pytest.raises(ModelError) as info:
        check_model(m)
    assert info.value.condition == "SelfContained"


def test_cyclic_model_is_not_schedulable():
    m = resolve_model(parse_model("""
    model {
       variable Bool a;
       variable Bool b;
       def aDens() : density(a | b) = if (b == 1) { flip(a, 0.3) } else { flip(a, 0.6) };
       def bDens() : density(b | a) = if (a == 1) { flip(b, 0.3) } else { flip(b, 0.6) };
    }"""))
    with pytest.raises(ModelError) as info:
        check_model(m)
    assert info.value.condition in ("Serial", "Complete")


def test_unrecognized_density_is_logged_assumption():
    m = resolve_model(parse_model("""
    model {
       variable Bool a;
       def aDens() : density(a) = 1.0;
    }"""))
    result = check_model(m)
    assert [a["definition"] for a in result.assumptions] == ["aDens"]


# ---------------------------------------------------------------- the corpus

@pytest.mark.parametrize("model_name,files", PROGRAMS, ids=[f[-1] for _, f in PROGRAMS])
def test_corpus_checks(model_name, files):
    m = load_model(model_name)
    report = check_program(m, load_defs(*files), model_result=check_model(m))
    assert report.definitions
    doc = report.to_json()
    assert doc["schema"] == 1
    assert {"definitions", "assumptions", "model_assumptions"} <= set(doc)


def _source_counts(files):
    text = "\n".join(re.sub(r"//.*", "", corpus_text(f)) for f in files)
    return len(re.findall(r"\(ind\b", text)) + len(re.findall(r"\bdef independent\b", text)), \
        len(re.findall(r"\blift\s*\{", text))


@pytest.mark.parametrize("model_name,files", PROGRAMS[:4], ids=[f[-1] for _, f in PROGRAMS[:4]])
def test_log_completeness(model_name, files):
    report = check_program(load_model(model_name), load_defs(*files))
    ind, lifts = _source_counts(files)
    assert len(report.log.independence()) == ind
    assert len(report.log.reaches_all()) == lifts


def test_exact_program_report(model):
    report = check_program(model, load_defs("burglary_exact.shi"))
    names = [d.name for d in report.definitions]
    assert names == ["alarmMarg", "callDensI", "callDensAll", "callsMarg", "burglaryPost"]
    assert report.macros == ["bayes_rule"]
    assert len(report.log.independence()) == 2
    assert report.log.reaches_all() == []
    assert str(report.type_of("burglaryPost").kind) == "density"


def test_gibbs_program_log(model):
    report = check_program(model, load_defs("burglary_prelude.shi", "burglary_gibbs.shi"))
    (reach,) = report.log.reaches_all()
    assert "abeKernel" in reach.location
    gibbs = [e for e in report.log.independence() if "callDensI" not in e.location]
    assert len(gibbs) == 5


def test_empty_program(model):
    report = check_program(model, [])
    assert report.definitions == [] and len(report.log) == 0


# ---------------------------------------------------------------- mutations

@pytest.mark.parametrize("label,kind,source,rule", MUTATIONS, ids=[m[0] for m in MUTATIONS])
def test_mutation_rejected(label, kind, source, rule, model):
    if kind == "model":
        with pytest.raises(ModelError) as info:
            check_model(resolve_model(parse_model(source())))
        assert info.value.condition == rule
    else:
        with pytest.raises(ShuffleTypeError) as info:
            check_program(model, parse_inference(source()))
        assert info.value.rule == rule
        assert info.value.location


def test_error_carries_witness(model):
    src = corpus_text("burglary_exact.shi").replace("callDensAll(p-1)", "callDensAll(p)")
    with pytest.raises(ShuffleTypeError) as info:
        check_program(model, parse_inference(src))
    assert info.value.premise


# ---------------------------------------------------------------- rules

def test_dmul_with_independence(model):
    t, log = infer_type(model, None, AssumptionLog(),
                        parse_term("alarmDens() * ((ind burglary) earthquakePrior())"))
    assert same(model, t, ty("density(alarm, earthquake | burglary)"))
    (entry,) = log.entries
    assert isinstance(entry, Independence)
    assert entry.targets == (S.Whole("earthquake"),)
    assert entry.independent == (S.Whole("burglary"),)


def test_integration(model):
    t, _ = infer_type(model, None, AssumptionLog(),
                      parse_term("int alarmDens() * ((ind burglary) earthquakePrior()) "
                                 "by earthquake"))
    assert same(model, t, ty("density(alarm | burglary)"))


def test_lift_logs_reaches_all(model):
    defs = load_defs("burglary_prelude.shi", "burglary_gibbs.shi")
    report = check_program(model, defs)
    t = report.type_of("abeKernel")
    assert same(model, t, ty("kernel(alarm, burglary, earthquake | calls)"))
    assert same(model, report.type_of("abePost"), ty("sampler(alarm, burglary, earthquake | calls)"))


def test_lift_rejects_real_targets():
    m = load_model("normal_mean.shm")
    defs = load_defs("normal_mean.shi")
    src = "def k() : kernel(mu | x) = lift { mu := sample muPost() };"
    macros = {d.name: d for d in defs if isinstance(d, S.MacroDef)}
    with pytest.raises(ShuffleTypeError) as info:
        check_program(m, defs + parse_inference(src, macros))
    assert info.value.rule == "KLIFT"


def test_coerce_section_61(model):
    t1 = DistType("density", parse_type("density(calls{i in People: i <= p-1} | alarm)").targets,
                  (S.Whole("alarm"),))
    t2 = DistType("density", parse_type("density(calls{i in People: i < p} | alarm)").targets,
                  (S.Whole("alarm"),))
    env = TypeEnv({"p": "People"}, {})
    assert coerce(model, t1, t2, env)
    assert coerce(model, t1, t1, env)


def test_coerce_constraint_direction(model):
    weak = ty("density(alarm | burglary, true)")
    strong = ty("density(alarm | burglary, false)")
    assert coerce(model, weak, strong)
    with pytest.raises(ShuffleTypeError):
        coerce(model, strong, weak)


def test_coerce_independent(model):
    t, log = coerce_independent(model, AssumptionLog(), ty("density(earthquake)"),
                                (S.Whole("burglary"),))
    assert same(model, t, ty("density(earthquake | burglary)"))
    assert len(log) == 1
    t2, log2 = coerce_independent(model, AssumptionLog(), ty("density(earthquake)"), ())
    assert t2 == ty("density(earthquake)") and len(log2) == 0
    with pytest.raises(ShuffleTypeError):
        coerce_independent(model, AssumptionLog(), ty("density(earthquake)"),
                           (S.Whole("earthquake"),))


def test_estimator_factor(model):
    report = check_program(model, load_defs("burglary_prelude.shi", "burglary_lw.shi"))
    assert same(model, report.type_of("lwPost"),
                ty("estimator(alarm, burglary, earthquake | calls)"))


def test_unit_spellings_agree(model):
    a, _ = infer_type(model, None, AssumptionLog(), parse_term("(1.0, return)"))
    b, _ = infer_type(model, None, AssumptionLog(), parse_term("(return, 1.0)"))
    assert a == b


def test_log_entry_text(model):
    report = check_program(model, load_defs("burglary_prelude.shi", "burglary_gibbs.shi"))
    text = report.to_text()
    assert "ReachesAll" in text and "_||_" in text
    assert all(isinstance(e, (Independence, ReachesAll)) for e in report.log)


# ---------------------------------------------------------------- substitution lemma

QS = st.sampled_from(["p", "r"])
idx = st.one_of(st.integers(0, 4).map(S.Num), QS.map(S.QVar),
                st.builds(S.Minus, QS.map(S.QVar), st.integers(1, 2)))
cmp = st.builds(S.Cmp, st.sampled_from(["==", "<", "<=", "!=", ">"]),
                st.one_of(st.just(S.QVar("i")), idx), idx)
sets = st.lists(st.one_of(st.just(S.Whole("calls")),
                          st.builds(S.Indexed, st.just("calls"), idx),
                          st.builds(S.Comp, st.just("calls"), st.just("i"), st.just("People"),
                                    cmp)), min_size=1, max_size=3).map(tuple)


@settings(max_examples=300, deadline=None)
@given(sets, idx, st.integers(0, 2), st.integers(0, 3), st.integers(0, 4), st.integers(0, 4))
def test_substitution_lemma(model, A, a, lo, width, p, r):
    w = {"bounds": {"People": (lo, lo + width)}, "quantifiers": {"p": p, "r": r}, "reads": {}}
    substituted = substitute(A, {"p": a})
    rebound = dict(w, quantifiers={"p": index_value(a, w, model), "r": r})
    for n in range(lo, lo + width + 1):
        assert member(substituted, "calls", n, w, model) == member(A, "calls", n, rebound, model)
