import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import burglary_data, load_defs, load_model
from runtime_harness import (DISCRETE_PROGRAMS, checked, compare_densities, sampler_definitions,
                             sampler_law, table_env)
from shuffle.data import data_from_dict
from shuffle.errors import RuntimeFault
from shuffle.oracle import distribution, enumerate_joint, frequency_test
from shuffle.runtime import (Env, LogProb, RandomSource, eval_density, from_linear, log_add,
                             log_sum, run_estimator, run_fix, run_sampler, split, to_linear)
from shuffle.surface import parse_inference, parse_model, parse_term, resolve_model
from shuffle.surface import syntax as S


def invoke(name, *args):
    return S.Invoke(name, tuple(S.Num(a) for a in args))


@pytest.fixture(scope="module")
def exact(burglary):
    return checked(burglary, ("burglary_exact.shi",))


@pytest.fixture(scope="module")
def gibbs(burglary):
    return checked(burglary, ("burglary_prelude.shi", "burglary_gibbs.shi"))


@pytest.fixture(scope="module")
def coverage(burglary):
    return checked(burglary, ("grammar_coverage.shi",))


# ---------------------------------------------------------------- densities

def test_flip_prior(burglary, make_data):
    env = Env.from_data(burglary, make_data(None, n=1, burglary=1))
    assert eval_density(burglary, env, invoke("burglaryPrior"))[0] == pytest.approx(
        math.log(0.002), abs=1e-15)


def test_unit_density(burglary, make_data):
    env = Env.from_data(burglary, make_data(None, n=1))
    assert eval_density(burglary, env, S.One())[0] == 0.0


def test_alarm_marginal(burglary, make_data, exact):
    env = Env.from_data(burglary, make_data(None, n=1, alarm=1, burglary=1))
    lp = eval_density(burglary, env, invoke("alarmMarg"), exact)[0]
    assert lp == pytest.approx(math.log(0.95 * 0.001 + 0.94 * 0.999), abs=1e-15)


@pytest.mark.parametrize("files", DISCRETE_PROGRAMS, ids=[f[-1] for f in DISCRETE_PROGRAMS])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_densities_match_oracle(burglary, files, n):
    data = data_from_dict(burglary_data(None, n), burglary)
    defs = checked(burglary, files)
    seen = 0
    for name, quants, k, got, want in compare_densities(burglary, data, defs, eval_density):
        assert got == pytest.approx(want, abs=1e-9), (name, quants, k)
        seen += 1
    assert seen > 0


def test_densities_normalize(burglary, make_data, exact):
    data = make_data(None, n=2)
    table = enumerate_joint(burglary, data)
    env = table_env(burglary, data, table)
    lp = eval_density(burglary, env, invoke("burglaryPost"), exact)
    # group the states by the conditioned calls and sum over burglary
    calls = [table.column(("calls", i)) for i in (0, 1)]
    others = [table.column(("alarm", 0)), table.column(("earthquake", 0))]
    for key in {tuple(r) for r in table.states[:, calls + others]}:
        rows = np.all(table.states[:, calls + others] == key, axis=1)
        assert np.exp(lp[rows]).sum() == pytest.approx(1.0, abs=1e-9)


def test_division_by_zero(burglary, make_data):
    m = resolve_model(parse_model("""
    model {
       variable Bool a;
       def aDens() : density(a) = flip(a, 1.0);
    }"""))
    defs = parse_inference("def r() : density( | a) = aDens() / aDens();")
    env = Env.from_data(m, data_from_dict({"observed": {"a": 0}}, m))
    with pytest.raises(RuntimeFault) as info:
        eval_density(m, env, invoke("r"), defs)
    assert info.value.kind == "DivZero"


def test_unset_variable(burglary, make_data):
    env = Env.from_data(burglary, make_data(None, n=1))
    with pytest.raises(RuntimeFault) as info:
        eval_density(burglary, env, invoke("burglaryPrior"))
    assert info.value.kind == "EnvMiss"


def test_intractable_integral():
    m = load_model("normal_mean.shm")
    defs = load_defs("normal_mean.shi")
    data = data_from_dict({"domains": {"Points": {"min": 0, "max": 1}},
                           "observed": {"x": [0.5, 1.0]}}, m)
    env = Env.from_data(m, data)
    term = parse_term("int obs(0) * obs(0) * muPrior() * muPrior() by mu")
    with pytest.raises(RuntimeFault) as info:
        eval_density(m, env, term, defs)
    assert info.value.kind == "IntractableIntegral"


# ---------------------------------------------------------------- samplers

def test_inverse_transform_boundary(burglary, make_data):
    R = 4000
    env = Env.from_data(burglary, make_data(None, n=1), R)
    rs = RandomSource(11, R)
    out = run_sampler(burglary, env, rs, parse_term("burglary := sample burglaryPrior()"))
    u = rs.draw(0)
    assert np.array_equal(out.column("burglary"), (u >= 1 - 0.002).astype(int))


def test_point_mass_ignores_uniform():
    m = resolve_model(parse_model("model { variable Bool v; def d() : density(v) = flip(v, 1.0); }"))
    env = Env.empty(m, None, 1000)
    out = run_sampler(m, env, RandomSource(5, 1000), parse_term("v := sample d()"))
    assert (out.column("v") == 1).all()


def test_lift_body_only_touches_targets(burglary, make_data, gibbs):
    calls = [1, 1, 1] + [0] * 7
    R = 200
    env = Env.from_data(burglary, make_data(calls), R).initialize("alarm") \
        .initialize("burglary").initialize("earthquake")
    out = run_sampler(burglary, env, RandomSource(1, R), invoke("abeKernel"), gibbs)
    assert np.array_equal(out.values["calls"], env.values["calls"])
    assert out.defined["calls"].all()


def test_fix_zero_iterations(burglary, make_data, gibbs):
    env = Env.from_data(burglary, make_data([1, 0]), 10).initialize("alarm") \
        .initialize("burglary").initialize("earthquake")
    out = run_fix(burglary, env, RandomSource(0, 10), invoke("abeKernel"), 0, gibbs)
    for var in env.values:
        assert np.array_equal(out.values[var], env.values[var])


def test_fix_of_lifted_exact_sampler(burglary, make_data, coverage):
    # one step of lift { s } has the law of s
    data = make_data([1, 0], alarm=1, burglary=0)
    R = 20000
    env = Env.from_data(burglary, data, R)
    out = run_fix(burglary, env, RandomSource(9, R), invoke("earthKernel"), 1, coverage)
    table = enumerate_joint(burglary, data)
    exact = distribution(table, ["earthquake"], {"alarm": 1, "burglary": 0})
    assert frequency_test([(int(v),) for v in out.column("earthquake")], exact, 0.01)


@pytest.mark.parametrize("files", DISCRETE_PROGRAMS[1:], ids=[f[-1] for f in DISCRETE_PROGRAMS[1:]])
def test_sampler_law(burglary, make_data, files):
    defs = checked(burglary, files)
    data = make_data(None, n=2)
    for d in sampler_definitions(defs):
        result, _ = sampler_law(burglary, data, defs, d, 20000, seed=4, fix_iters=20)
        assert result, (d.name, result)


def test_replayable(burglary, make_data, gibbs):
    env = Env.from_data(burglary, make_data([1, 1, 0]), 50)
    a = run_sampler(burglary, env, RandomSource(7, 50), invoke("abePost"), gibbs, fix_iters=5)
    b = run_sampler(burglary, env, RandomSource(7, 50), invoke("abePost"), gibbs, fix_iters=5)
    for var in a.values:
        assert np.array_equal(a.values[var], b.values[var])


def test_sampling_a_real_needs_a_closed_form():
    m = load_model("normal_mean.shm")
    defs = load_defs("normal_mean.shi")
    data = data_from_dict({"domains": {"Points": {"min": 0, "max": 0}},
                           "observed": {"x": [0.5]}}, m)
    env = Env.from_data(m, data, 10)
    with pytest.raises(RuntimeFault) as info:
        run_sampler(m, env, RandomSource(0, 10), parse_term("mu := sample obs(0) * obs(0)"), defs)
    assert info.value.kind == "UnsampleableDensity"


# ---------------------------------------------------------------- estimators

def test_elift_has_unit_weight(burglary, make_data):
    defs = checked(burglary, ("burglary_prelude.shi", "burglary_lw.shi"))
    env = Env.from_data(burglary, make_data([1, 0]), 100)
    w, out = run_estimator(burglary, env, RandomSource(0, 100),
                           parse_term("elift { priorSampler() }"), defs)
    assert (w == 0).all()
    assert out.defined["alarm"].all()


def test_factor_weight_is_likelihood(burglary, make_data):
    defs = checked(burglary, ("burglary_prelude.shi", "burglary_lw.shi"))
    calls = [1, 0, 1]
    env = Env.from_data(burglary, make_data(calls), 500)
    w, out = run_estimator(burglary, env, RandomSource(3, 500), invoke("lwPost"), defs)
    a = out.column("alarm")
    like = np.where(a == 1, 0.9 ** 2 * 0.1, 0.01 ** 2 * 0.99)
    assert np.allclose(w, np.log(like), atol=1e-12)


def test_unit_estimator(burglary, make_data):
    env = Env.from_data(burglary, make_data([1]), 3)
    w, out = run_estimator(burglary, env, RandomSource(0, 3), parse_term("(1.0, return)"))
    assert (w == 0).all() and out is env


# ---------------------------------------------------------------- random sources

def test_split_is_deterministic():
    a1, b1 = split(RandomSource(42, 8))
    a2, b2 = split(RandomSource(42, 8))
    assert np.array_equal(a1.draw(0), a2.draw(0)) and np.array_equal(b1.draw(3), b2.draw(3))


@pytest.mark.parametrize("child", [0, 1])
def test_split_children_are_uniform(child):
    rs = split(RandomSource(2024, 10 ** 5))[child]
    u = rs.draw(0)
    counts = np.bincount((u * 100).astype(int), minlength=100)
    assert stats.chisquare(counts).pvalue >= 0.01


def test_split_children_uncorrelated():
    left, right = RandomSource(8, 10 ** 5).split()
    r = np.corrcoef(left.draw(0), right.draw(0))[0, 1]
    assert abs(r) < 4 / math.sqrt(10 ** 5)


def test_adjacent_seeds_differ():
    a, b = RandomSource(5, 4).split()[0], RandomSource(6, 4).split()[0]
    assert not np.any(a.draw(0) == b.draw(0))


def test_replicas_are_independent_streams():
    u = RandomSource(1, 10 ** 5).draw(0)
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 4 / math.sqrt(10 ** 5)


# ---------------------------------------------------------------- log probabilities

@settings(max_examples=300, deadline=None)
@given(st.floats(1e-300, 1.0), st.floats(1e-300, 1.0))
def test_log_add_matches_extended_precision(a, b):
    got = log_add(math.log(a), math.log(b))
    want = float(mpmath.log(mpmath.mpf(a) + mpmath.mpf(b)))
    assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-300, 1.0))
def test_round_trip(p):
    assert to_linear(from_linear(p)) == pytest.approx(p, rel=1e-12)


def test_long_product_does_not_underflow():
    lp = LogProb.of(1.0)
    for _ in range(10 ** 4):
        lp = lp * LogProb.of(0.5)
    assert lp.log == pytest.approx(-10 ** 4 * math.log(2), rel=1e-12)
    assert math.isfinite(lp.log)


def test_zero_handling():
    assert LogProb.of(0.0).log == -math.inf
    assert log_sum([-math.inf, -math.inf]) == -math.inf
    with pytest.raises(ZeroDivisionError):
        LogProb.of(0.5) / LogProb.of(0.0)
