"""
activity-shift

A toolkit for detecting abrupt changes in per-user posting activity:
production-vs-amplification metrics, segmented regression and Bayesian
switchpoint detectors, and population-level jump aggregation.
"""

__version__ = "0.1.0"

# Export the ActivityAnalyzer facade and RunConfig for direct import
from .analyzer import ActivityAnalyzer
from .config import RunConfig

# Import modules to make them available when the analyzer is created
from .modules.metrics import ActivityMetrics
from .modules.segmented import SegmentedRegression
from .modules.switchpoint import BayesSwitchpoint
from .modules.synthetic import SyntheticGenerator
