"""Best-of-both-worlds pipeline: constrained CEEI, bihierarchy lottery
decomposition, and the chores duality."""

from .chores import (
    CopiesView,
    chores_to_copies,
    copies_alloc_to_chores,
    lift_allocation,
    materialize_copies,
)
from .markets import (
    CEEICertificate,
    CEEIResiduals,
    FractionalAllocation,
    PriceVector,
    bang_per_buck_violation,
    compute_ceei,
    normalized_values,
    verify_ceei,
)
from .rounding import (
    Bihierarchy,
    CeLotteryResult,
    Lottery,
    QuotaConstraint,
    bihierarchy_decompose,
    build_bihierarchy,
    ce_lottery,
    ce_lottery_with_certificate,
    preference_order,
    rationalize_allocation,
)

__all__ = [
    "Bihierarchy",
    "CEEICertificate",
    "CEEIResiduals",
    "CeLotteryResult",
    "CopiesView",
    "FractionalAllocation",
    "Lottery",
    "PriceVector",
    "QuotaConstraint",
    "bang_per_buck_violation",
    "bihierarchy_decompose",
    "build_bihierarchy",
    "ce_lottery",
    "ce_lottery_with_certificate",
    "chores_to_copies",
    "compute_ceei",
    "copies_alloc_to_chores",
    "lift_allocation",
    "materialize_copies",
    "normalized_values",
    "preference_order",
    "rationalize_allocation",
    "verify_ceei",
]
