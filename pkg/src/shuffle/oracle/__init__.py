"""Exhaustive ground truth for discrete models and statistical test helpers."""

from .joint import (JointTable, conditional, density_value, distribution,  # noqa: F401
                    enumerate_joint, joint_value)
from .stats import FrequencyResult, frequency_test  # noqa: F401
