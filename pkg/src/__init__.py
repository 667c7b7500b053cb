"""
nptrack - Core Package

Trajectory tracking on nonplanar terrain with a sampling-based predictive
controller and an online-adapted sparse Gaussian-process residual model.
"""

__version__ = "0.1.0"
__author__ = "nptrack developers"
