"""
Analysis modules of the activity-shift toolkit.

This package contains the timeline model, the activity metrics, both
change detectors, the synthetic generator and the batch pipeline.
"""
