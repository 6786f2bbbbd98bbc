"""Lowering to the loop IR, log-space conversion and conjugate closed forms."""

from . import conjugate  # noqa: F401
from .ir import IRProgram, IRResult, compile_ir, dumps, run_ir  # noqa: F401
from .lower import bind_inputs, canonical_rec_factor, lower  # noqa: F401
from .rewrite import conjugate_rewrite, to_logspace  # noqa: F401
