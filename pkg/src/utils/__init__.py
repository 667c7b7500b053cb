"""
nptrack - Utilities

Logging setup, the exception hierarchy and the diagnostics reporter.
"""
