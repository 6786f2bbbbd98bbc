"""Lexing, parsing, pretty-printing and name resolution."""

from .syntax import *  # noqa: F401,F403
from .parser import (parse_model, parse_inference, parse_term, parse_type,  # noqa: F401
                     parse_constraint, parse_varsets, parse_index, collect_macros)
from .printer import pretty_print  # noqa: F401
from .resolve import resolve_model, resolve_program, resolve_definition  # noqa: F401
