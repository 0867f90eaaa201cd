"""
Analyzer module for the activity-shift toolkit.

This module provides the facade that binds a RunConfig to the analysis
modules.
"""

import logging
from typing import Optional

from .config import RunConfig
from .modules.timeline import DailySeries, Timeline, bin_daily

logger = logging.getLogger(__name__)


class ActivityAnalyzer:
    """
    Facade over the analysis modules.

    Each module registers itself on the analyzer (`metrics`, `ssr`,
    `bayes`, `synthetic`) and reads its settings from `config`.
    """

    def __init__(self, config: Optional[RunConfig] = None):
        """
        Initialize the ActivityAnalyzer.

        Args:
            config: Run configuration (defaults when omitted)
        """
        self.config = config or RunConfig()

        # Initialize placeholder for analysis modules
        self.metrics = None
        self.ssr = None
        self.bayes = None
        self.synthetic = None

        self._init_modules()

    def series(self, timeline: Timeline) -> DailySeries:
        """Daily counts of a timeline over the configured window."""
        return bin_daily(timeline, self.config.window)

    def _init_modules(self):
        """
        Initialize all analysis modules.
        """
        # Import modules here to avoid circular imports
        from .modules.metrics import ActivityMetrics
        from .modules.segmented import SegmentedRegression
        from .modules.switchpoint import BayesSwitchpoint
        from .modules.synthetic import SyntheticGenerator

        ActivityMetrics(self)
        SegmentedRegression(self)
        BayesSwitchpoint(self)
        SyntheticGenerator(self)

        logger.debug("All analysis modules initialized successfully")
