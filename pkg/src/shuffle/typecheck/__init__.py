"""The type system: model validity, typing rules and the assumption log."""

from .checker import (Checker, check_definition, coerce, coerce_independent,  # noqa: F401
                      infer_type)
from .model import ScheduleStep, ValidModel, check_model  # noqa: F401
from .program import Report, TypedDefinition, check_program  # noqa: F401
from .types import (ANY, AssumptionLog, DistType, Independence, ReachesAll,  # noqa: F401
                    Signature, TypeEnv, show_type)
