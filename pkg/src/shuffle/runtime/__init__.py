"""Batched execution of densities, samplers, kernels and estimators."""

from .env import Env  # noqa: F401
from .interp import Interpreter, prim_logpdf  # noqa: F401
from .logprob import NEG_INF, LogProb, from_linear, log_add, log_mul, log_sum, to_linear  # noqa: F401
from .rng import RandomSource, split  # noqa: F401


def eval_density(model, env, term, defs=(), quants=None):
    """Log density of `term` per replica."""
    return Interpreter(model, defs, env.data).density(term, env, quants)


def run_sampler(model, env, rs, term, defs=(), fix_iters=100, quants=None):
    """Run a sampler; returns the updated Env."""
    return Interpreter(model, defs, env.data, fix_iters).sample(term, env, rs, quants)


def run_fix(model, env, rs, kernel, iters, defs=(), quants=None):
    """Apply a kernel `iters` times from env, splitting the source each step."""
    return Interpreter(model, defs, env.data).run_fix(kernel, env, rs, iters, quants)


def run_estimator(model, env, rs, term, defs=(), quants=None):
    """Run an estimator; returns (log weights, Env)."""
    return Interpreter(model, defs, env.data).estimate(term, env, rs, quants)
