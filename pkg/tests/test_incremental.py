import numpy as np
import pytest

from shuffle.errors import NotInvertible
from shuffle.incremental import (appendix_program, detect, gmm_gibbs_program, optimize,
                                 prefix_sum_program, transform)
from shuffle.simplify import IRProgram, dumps, run_ir
from shuffle.simplify import ir as I


def V(name):
    return I.Var(name)


def last(e):
    return I.Bin("-", e, I.Const(1))


# ---------------------------------------------------------------- random IR corpus

GUARDS = {
    "exclusion": lambda: I.Bin("!=", V("j"), V("i")),
    "prefix": lambda: I.Bin("<", V("j"), V("i")),
    "key": lambda: I.Bin("==", I.Load("x", V("i")), I.Load("y", V("j"))),
    "inner": lambda: I.Bin(">", I.Load("a", V("j")), I.Const(0.3)),
    "outer": lambda: I.Bin("<", I.Load("a", V("j")), I.Load("a", V("i"))),
}
DELTAS = [
    lambda: I.Load("a", V("j")),
    lambda: I.Const(1.0),
    lambda: I.Bin("*", I.Load("a", V("j")), I.Load("a", V("j"))),
    lambda: I.Bin("+", I.Load("a", V("j")), I.Load("y", V("j"))),
]


def random_program(rng):
    """A nested reduction with a random guard, deltas and use of the result."""
    names = list(GUARDS)
    picked = [names[k] for k in rng.choice(len(names), rng.integers(0, 3), replace=False)]
    guard = [GUARDS[g]() for g in picked]
    n_acc = int(rng.integers(1, 3))
    accs = [f"s{k}" for k in range(n_acc)]
    deltas = [DELTAS[int(rng.integers(len(DELTAS)))]() for _ in accs]
    inner_body = tuple(I.Accum(a, "+", d) for a, d in zip(accs, deltas))
    if guard:
        cond = guard[0]
        for c in guard[1:]:
            cond = I.Bin("and", cond, c)
        inner_body = (I.If(cond, inner_body),)
    hi = last(V("i")) if rng.random() < 0.2 else last(V("N"))
    inner = I.For("j", I.Const(0), hi, inner_body)
    result = V(accs[0])
    for a in accs[1:]:
        result = I.Bin("+", result, I.Bin("*", I.Const(0.5), V(a)))
    body = tuple(I.Assign(a, I.Const(0.0)) for a in accs) + (inner, I.Store("b", V("i"), result))
    if rng.random() < 0.3:
        # write back into an input, Gibbs style
        body = body + (I.Store("a", V("i"), I.Select(I.Bin(">", result, I.Const(1.0)),
                                                     I.Const(0.25), I.Const(0.75))),)
    if rng.random() < 0.3:
        body = (I.Assign("t", I.Load("a", V("i"))),) + body
    outer = I.For("i", I.Const(0), last(V("N")), body)
    return IRProgram("random", scalars=("N", "M"), arrays=("x", "y", "a", "b"), body=(outer,),
                     value_ranges=(("x", I.Const(0), last(V("M"))),
                                   ("y", I.Const(0), last(V("M")))),
                     outputs=("a", "b"))


def random_inputs(rng):
    n, m = int(rng.integers(0, 13)), int(rng.integers(1, 5))
    return {"N": n, "M": m, "x": rng.integers(0, m, n), "y": rng.integers(0, m, n),
            "a": rng.random(n), "b": np.zeros(n)}


def test_differential_equivalence():
    rng = np.random.default_rng(2024)
    changed = 0
    for _ in range(500):
        prog = random_program(rng)
        inputs = random_inputs(rng)
        opt = optimize(prog)
        changed += opt != prog
        want = run_ir(prog, inputs)
        got = run_ir(opt, inputs)
        for name in prog.outputs:
            np.testing.assert_allclose(got.arrays[name], want.arrays[name], rtol=0, atol=1e-9,
                                       err_msg=dumps(prog))
    assert changed > 250


def test_outer_dependent_guard_is_skipped():
    rng = np.random.default_rng(0)
    while True:
        prog = random_program(rng)
        if any(c == GUARDS["outer"]() for s in detect(prog) for c in s.guard):
            break
    with pytest.raises(NotInvertible):
        transform(prog, detect(prog)[0])
    assert optimize(prog) == prog


# ---------------------------------------------------------------- detection

def test_detect_prefix_sum():
    [site] = detect(prefix_sum_program())
    assert (site.outer_var, site.inner_var, site.keys) == ("i", "j", None)
    assert site.accumulators == ("s",)


def test_detect_keyed():
    [site] = detect(appendix_program())
    assert site.keys == (I.Load("x", V("i")), I.Load("y", V("j")))
    assert I.Bin("!=", V("i"), V("j")) in site.guard


def test_detect_straight_line():
    prog = IRProgram("flat", scalars=("u",), arrays=(), body=(
        I.Assign("s", I.Const(0.0)), I.Accum("s", "+", V("u")), I.Return(V("s"))))
    assert detect(prog) == []
    assert optimize(prog) is prog


def test_detect_gmm_sites():
    sites = detect(gmm_gibbs_program())
    assert sites[0].outer_var == "i" and sites[0].accumulators == ("n", "t")


# ---------------------------------------------------------------- transformation

def test_prefix_sum_becomes_running_sum():
    opt = optimize(prefix_sum_program())
    loops = [s for s in I.walk(opt.body) if isinstance(s, I.For)]
    assert len(loops) == 1
    rng = np.random.default_rng(3)
    a = rng.random(50)
    out = run_ir(opt, {"N": 50, "A": a, "B": np.zeros(50)}).arrays["B"]
    np.testing.assert_allclose(out, np.concatenate([[0.0], np.cumsum(a)[:-1]]), atol=1e-12)


def test_keyed_sum_is_partitioned():
    prog = appendix_program()
    opt = optimize(prog)
    text = dumps(opt)
    assert "alloc" in text.lower()
    # one pass to initialise plus the outer loop; no nested loop remains
    assert all(not any(isinstance(t, I.For) for t in I.walk(s.body))
               for s in I.walk(opt.body) if isinstance(s, I.For))
    rng = np.random.default_rng(4)
    n, m = 40, 3
    x, y, a = rng.integers(0, m, n), rng.integers(0, m, n), rng.random(n)
    got = run_ir(opt, {"N": n, "M": m, "x": x, "y": y, "a": a, "b": np.zeros(n)}).arrays["b"]
    want = [sum(a[j] for j in range(n) if j != i and y[j] == x[i]) for i in range(n)]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_loop_invariant_sum_is_hoisted():
    prog = IRProgram("licm", scalars=("N",), arrays=("a", "b"), body=(
        I.For("i", I.Const(0), last(V("N")), (
            I.Assign("s", I.Const(0.0)),
            I.For("j", I.Const(0), last(V("N")), (I.Accum("s", "+", I.Load("a", V("j"))),)),
            I.Store("b", V("i"), I.Bin("*", V("s"), I.Load("a", V("i")))))),),
        outputs=("b",))
    opt = optimize(prog)
    top = opt.body
    assert isinstance(top[-1], I.For)
    assert not any(isinstance(s, I.For) for s in I.walk(top[-1].body))
    assert not any(isinstance(s, I.Accum) and s.op == "-" for s in I.walk(opt.body))
    a = np.arange(1.0, 6.0)
    got = run_ir(opt, {"N": 5, "a": a, "b": np.zeros(5)}).arrays["b"]
    np.testing.assert_allclose(got, a.sum() * a)


def test_linear_probability_sum_is_not_invertible():
    prog = IRProgram("psum", scalars=("N",), arrays=("a", "b"), body=(
        I.For("i", I.Const(0), last(V("N")), (
            I.Assign("s", I.PConst(0.0)),
            I.For("j", I.Const(0), last(V("N")), (I.Accum("s", "padd", I.Load("a", V("j"))),)),
            I.Store("b", V("i"), V("s")))),),
        outputs=("b",))
    [site] = detect(prog)
    with pytest.raises(NotInvertible):
        transform(prog, site)
    assert optimize(prog) == prog


def test_missing_key_range_is_not_invertible():
    prog = appendix_program()
    bare = IRProgram(prog.name, prog.scalars, prog.arrays, prog.body, outputs=prog.outputs)
    with pytest.raises(NotInvertible):
        transform(bare, detect(bare)[0])


def test_optimize_reaches_fixpoint():
    for prog in (prefix_sum_program(), appendix_program(), gmm_gibbs_program()):
        opt = optimize(prog)
        assert optimize(opt) == opt
        assert dumps(optimize(prog)) == dumps(opt)
        pairs = len(detect(prog))
        assert optimize(prog, max_rounds=max(1, pairs)) == opt


def test_gmm_sweep_is_unchanged_by_optimization():
    rng = np.random.default_rng(8)
    n, k = 200, 4
    centers = np.linspace(-12.0, 12.0, k)
    inputs = {"N": n, "K": k, "mu0": 0.0, "sd0": 10.0, "sd": 1.0, "alpha": 1.0,
              "x": centers[rng.integers(0, k, n)] + rng.normal(size=n),
              "z": rng.integers(0, k, n), "U": rng.random(n)}
    prog = gmm_gibbs_program()
    opt = optimize(prog)
    want, got = run_ir(prog, inputs), run_ir(opt, inputs)
    assert np.array_equal(want.arrays["z"], got.arrays["z"])
    assert got.ops * 20 < want.ops


# ---------------------------------------------------------------- complexity

def op_counts(prog, sizes):
    rng = np.random.default_rng(0)
    return [run_ir(prog, {"N": n, "A": rng.random(n), "B": np.zeros(n)}, jit=True).ops
            for n in sizes]


def test_operation_count_scaling():
    pytest.importorskip("numba")
    sizes = [2 ** 12, 2 ** 13, 2 ** 14]
    base = op_counts(prefix_sum_program(), sizes)
    opt = op_counts(optimize(prefix_sum_program()), sizes)
    for a, b in zip(opt, opt[1:]):
        assert 1.8 <= b / a <= 2.2
    for a, b in zip(base, base[1:]):
        assert 3.5 <= b / a <= 4.5
