"""
Vehicle state and input layout.

Numerical code works on plain arrays whose last axis follows the index
constants below.
"""

# state x = [p_x, p_y, psi, delta, v, beta, r]
PX, PY, PSI, DELTA, V, BETA, R = range(7)
STATE_DIM = 7

# input u = [a, v_delta]
ACCEL, STEER_RATE = range(2)
INPUT_DIM = 2

# components of the state that receive the learned residual (v, beta, r)
RESIDUAL_SLICE = slice(V, R + 1)
RESIDUAL_DIM = 3

STATE_LABELS = ("p_x", "p_y", "psi", "delta", "v", "beta", "r")
INPUT_LABELS = ("a", "v_delta")
