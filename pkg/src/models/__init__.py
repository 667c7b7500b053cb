"""
nptrack - Data Models

Run configuration schema and the vehicle state/input layout.
"""
