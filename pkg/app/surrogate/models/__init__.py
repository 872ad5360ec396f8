"""
Report schemas for the surrogate evaluation engine.
"""

from app.surrogate.models.hypothesis import HomogeneityReport, TestResult
from app.surrogate.models.intervals import IntervalEstimate, ValidityDecision
from app.surrogate.models.manifest import RunManifest
from app.surrogate.models.panel_report import (
    DominanceReport,
    DominanceRow,
    PanelReport,
)
from app.surrogate.models.results import (
    BenchmarkReport,
    BenchmarkRow,
    BootstrapReport,
    FitReport,
    LagSweepReport,
    LagSweepRow,
    PteReport,
    TruthRecord,
)

__all__ = [
    "BenchmarkReport",
    "BenchmarkRow",
    "BootstrapReport",
    "DominanceReport",
    "DominanceRow",
    "FitReport",
    "HomogeneityReport",
    "IntervalEstimate",
    "LagSweepReport",
    "LagSweepRow",
    "PanelReport",
    "PteReport",
    "RunManifest",
    "TestResult",
    "TruthRecord",
    "ValidityDecision",
]
