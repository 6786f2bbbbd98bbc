"""Incrementalization of nested reductions in the loop IR."""

from .optimize import ReductionSite, detect, optimize, transform  # noqa: F401
from .programs import appendix_program, gmm_gibbs_program, prefix_sum_program  # noqa: F401
