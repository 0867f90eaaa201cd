"""
Command-line interface for the activity-shift toolkit.
"""
