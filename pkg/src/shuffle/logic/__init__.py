"""Decision procedures over constraints and variable sets."""

from .encode import SymbolicCtx, enc_constraint, enc_index, membership, surface_membership  # noqa: F401
from .formula import Obligation  # noqa: F401
from .queries import (  # noqa: F401
    COMPUTABLE_CONSTRAINT, COMPUTABLE_TARGETS, ERROR_FREE, STRATIFIED,
    CachingSolver, EnumerativeSolver, ExternalSolver, LogicQuery, RecordingSolver, Verdict,
    check_base_case, check_empty, check_implication, check_set_disjoint, check_set_equiv,
    check_subset, check_valid_infer, default_solver, emit_smtlib, obligations,
    solve_enumerative, solve_external, stratification_order,
)
