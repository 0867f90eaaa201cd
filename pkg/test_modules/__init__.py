"""
Test modules for the activity-shift toolkit.

This package contains one test script per module of the toolkit.
"""
