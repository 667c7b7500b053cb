"""
Single-Track Vehicle Model

Dynamic single-track (bicycle) model with linear tire forces and load
transfer through the CoG height, blended into the kinematic single-track
model at low speed. Tire stiffnesses are per unit load, so lateral forces
scale with friction and axle load.

All functions operate on arrays whose last axis is the state (7) or input (2)
dimension; leading axes are broadcast, so a batch of rollouts is propagated in
one call.
"""

from typing import Callable

import numpy as np

from models.config import VehicleParams
from models.state import ACCEL, BETA, DELTA, PSI, PX, PY, R, STEER_RATE, V
from utils.exceptions import NonFiniteState

GRAVITY = 9.81

# kinematic below V_BLEND_LOW, dynamic above V_SWITCH, linear blend between
V_BLEND_LOW = 0.1
V_SWITCH = 0.5

Derivative = Callable[[np.ndarray], np.ndarray]


def _dynamic_slip_yaw(x: np.ndarray, u: np.ndarray, p: VehicleParams):
    delta, beta, r = x[..., DELTA], x[..., BETA], x[..., R]
    v = np.maximum(x[..., V], V_BLEND_LOW)
    a = u[..., ACCEL]

    lf, lr, h = p.l_f, p.l_r, p.cog_height
    wheelbase = lf + lr
    csf, csr, mu = p.cornering_stiffness_front, p.cornering_stiffness_rear, p.friction

    # axle loads per unit mass
    load_f = GRAVITY * lr - a * h
    load_r = GRAVITY * lf + a * h
    front = csf * load_f
    rear = csr * load_r

    beta_dot = (
        (mu / (v**2 * wheelbase) * (rear * lr - front * lf) - 1.0) * r
        - mu / (v * wheelbase) * (rear + front) * beta
        + mu / (v * wheelbase) * front * delta
    )

    k = mu * p.mass / (p.yaw_inertia * wheelbase)
    r_dot = (
        -k / v * (lf**2 * front + lr**2 * rear) * r
        + k * (lr * rear - lf * front) * beta
        + k * lf * front * delta
    )
    return beta_dot, r_dot


def _kinematic_slip_yaw(x: np.ndarray, u: np.ndarray, p: VehicleParams):
    delta, v, beta = x[..., DELTA], x[..., V], x[..., BETA]
    a, v_delta = u[..., ACCEL], u[..., STEER_RATE]
    wheelbase = p.l_f + p.l_r

    tan_d = np.tan(delta)
    cos2_d = np.cos(delta) ** 2
    ratio = p.l_r * tan_d / wheelbase

    beta_dot = (p.l_r / wheelbase) * v_delta / (cos2_d * (1.0 + ratio**2))
    r_dot = (
        a * np.cos(beta) * tan_d
        - v * np.sin(beta) * beta_dot * tan_d
        + v * np.cos(beta) * v_delta / cos2_d
    ) / wheelbase
    return beta_dot, r_dot


def blend_weight(v) -> np.ndarray:
    """Weight of the dynamic model: 0 at or below 0.1 m/s, 1 at or above 0.5 m/s."""
    return np.clip((np.asarray(v) - V_BLEND_LOW) / (V_SWITCH - V_BLEND_LOW), 0.0, 1.0)


def st_derivative(x, u, p: VehicleParams, check: bool = True) -> np.ndarray:
    """
    Time derivative of the single-track state.

    Args:
        x: State array [p_x, p_y, psi, delta, v, beta, r], shape (..., 7)
        u: Input array [a, v_delta], shape (..., 2)
        p: Vehicle parameters
        check: Raise on non-finite input instead of propagating NaN

    Returns:
        x_dot with the same shape as x

    Raises:
        NonFiniteState: x or u contains NaN/inf (only when check is set)
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if check and not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise NonFiniteState("State or input is not finite", context={"x": x.tolist()})

    v, psi, beta = x[..., V], x[..., PSI], x[..., BETA]
    w = blend_weight(v)
    beta_dyn, r_dyn = _dynamic_slip_yaw(x, u, p)
    beta_kin, r_kin = _kinematic_slip_yaw(x, u, p)

    dx = np.empty(np.broadcast_shapes(x.shape, u.shape[:-1] + (x.shape[-1],)))
    dx[..., PX] = v * np.cos(psi + beta)
    dx[..., PY] = v * np.sin(psi + beta)
    dx[..., PSI] = x[..., R]
    dx[..., DELTA] = u[..., STEER_RATE]
    dx[..., V] = u[..., ACCEL]
    dx[..., BETA] = w * beta_dyn + (1.0 - w) * beta_kin
    dx[..., R] = w * r_dyn + (1.0 - w) * r_kin
    return dx


def rk4(f: Derivative, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of x' = f(x) with inputs held constant."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def clamp_state(x: np.ndarray, p: VehicleParams) -> np.ndarray:
    """Clamp steering angle and speed to their bounds (in place) and return x."""
    x[..., DELTA] = np.clip(x[..., DELTA], p.steer_min, p.steer_max)
    x[..., V] = np.clip(x[..., V], p.v_min, p.v_max)
    return x


def ode_step(x, u, p: VehicleParams, dt: float, check: bool = True) -> np.ndarray:
    """
    Advance the nominal model by dt with RK4, then clamp delta and v.

    psi is never wrapped here.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    x_next = rk4(lambda s: st_derivative(s, u, p, check=check), x, dt)
    return clamp_state(x_next, p)
