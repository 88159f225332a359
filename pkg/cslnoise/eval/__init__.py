"""
Evaluation Module
=================
Checks of the analysis against reference values and against its own
synthetic campaigns.

- ReferenceSet: published budget rows used as golden values
- CampaignEvaluator: seeded end-to-end runs, coverage and gate rates
"""

from .reference import REFERENCE_ROWS, ReferenceRow, ReferenceSet
from .coverage import NOMINAL_COVERAGE, CampaignEvaluator, SeedOutcome, binomial_interval

__all__ = [
    "REFERENCE_ROWS",
    "ReferenceRow",
    "ReferenceSet",
    "NOMINAL_COVERAGE",
    "CampaignEvaluator",
    "SeedOutcome",
    "binomial_interval",
]
