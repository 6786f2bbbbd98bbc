"""Reference IR programs: prefix sum, the key-partitioned example and a GMM Gibbs sweep."""

from __future__ import annotations

from ..simplify.ir import (Accum, Alloc, Assign, Bin, Call, Const, For, If, IRProgram, Load,
                           SampleCat, Store, Var)


def _v(name):
    return Var(name)


def _minus1(e):
    return Bin("-", e, Const(1))


def prefix_sum_program():
    """B[i] = sum of A[j] for j < i, written as a nested loop."""
    return IRProgram("prefix_sum", scalars=("N",), arrays=("A", "B"), body=(
        For("i", Const(0), _minus1(_v("N")), (
            Assign("s", Const(0.0)),
            For("j", Const(0), _minus1(_v("i")), (Accum("s", "+", Load("A", _v("j"))),)),
            Store("B", _v("i"), _v("s")))),),
        outputs=("B",))


def appendix_program():
    """b[i] = sum of a[j] over j != i with y[j] == x[i]; x and y take values in 0..M-1."""
    guard = Bin("and", Bin("!=", _v("i"), _v("j")),
                Bin("==", Load("x", _v("i")), Load("y", _v("j"))))
    return IRProgram("keyed_sum", scalars=("N", "M"), arrays=("x", "y", "a", "b"), body=(
        For("i", Const(0), _minus1(_v("N")), (
            Assign("s", Const(0.0)),
            For("j", Const(0), _minus1(_v("N")), (
                If(guard, (Accum("s", "+", Load("a", _v("j"))),)),)),
            Store("b", _v("i"), _v("s")))),),
        value_ranges=(("x", Const(0), _minus1(_v("M"))), ("y", Const(0), _minus1(_v("M")))),
        outputs=("b",))


def gmm_gibbs_program():
    """One collapsed Gibbs sweep over cluster assignments z of points x.

    Cluster means have a Normal(mu0, sd0) prior, observations have known
    noise sd, and mixture weights a symmetric Dirichlet(alpha) prior, so
    each conditional needs the count and sum of the other points per cluster.
    """
    guard = Bin("and", Bin("!=", _v("j"), _v("i")), Bin("==", Load("z", _v("j")), _v("k")))
    score = Bin("+", Call("log", (Bin("+", _v("n"), _v("alpha")),)),
                Call("normal_predictive_lp", (Load("x", _v("i")), _v("mu0"), _v("sd0"),
                                              _v("sd"), _v("n"), _v("t"))))
    return IRProgram("gmm_gibbs", scalars=("N", "K", "mu0", "sd0", "sd", "alpha"),
                     arrays=("x", "z", "U"), body=(
        For("i", Const(0), _minus1(_v("N")), (
            Alloc("w", _v("K"), Const(0.0)),
            For("k", Const(0), _minus1(_v("K")), (
                Assign("n", Const(0.0)),
                Assign("t", Const(0.0)),
                For("j", Const(0), _minus1(_v("N")), (
                    If(guard, (Accum("n", "+", Const(1.0)),
                               Accum("t", "+", Load("x", _v("j"))))),)),
                Store("w", _v("k"), score))),
            SampleCat("z", _v("i"), "w", Const(0), Load("U", _v("i"))))),),
        value_ranges=(("z", Const(0), _minus1(_v("K"))),), outputs=("z",))
