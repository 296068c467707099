"""Randomized allocation of indivisible goods that is truthful in expectation
and guarantees every agent a share of her truncated proportional share in
every outcome.
"""

from .harness import adversarial_corpus, audit_tie, certify_expost, weight_statistics
from .mechanisms import (
    general_weight_mechanism,
    harmonic,
    mechanism_logn,
    mechanism_loglog,
    mechanism_public_deficiency,
    mechanism_two_agents,
)
from .model import AgentOrdering, Allocation, Distribution, Instance, expected_value, induced_fractional
from .picking import cuq_fractional, unit_quota
from .rounding import faithful_implement, implement_export, reduce_support
from .shares import mms_oracle, prop_share, tps

__all__ = [
    "AgentOrdering",
    "Allocation",
    "Distribution",
    "Instance",
    "adversarial_corpus",
    "audit_tie",
    "certify_expost",
    "cuq_fractional",
    "expected_value",
    "faithful_implement",
    "general_weight_mechanism",
    "harmonic",
    "implement_export",
    "induced_fractional",
    "mechanism_logn",
    "mechanism_loglog",
    "mechanism_public_deficiency",
    "mechanism_two_agents",
    "mms_oracle",
    "prop_share",
    "reduce_support",
    "tps",
    "unit_quota",
    "weight_statistics",
]
