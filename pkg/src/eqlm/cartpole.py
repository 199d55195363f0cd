"""Cart-pole balancing task with the classic frictionless dynamics.

Mirrors the ``CartPole-v0`` benchmark: two actions pushing the cart with a
fixed 10 N force left or right, +1 reward per step, explicit Euler updates
every 0.02 s, and termination once the pole tilts past 12 degrees, the cart
leaves [-2.4, 2.4] m, or 200 steps have been taken.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12 * 2 * math.pi / 360
X_LIMIT = 2.4
MAX_STEPS = 200
RESET_BOUND = 0.05


class UsageError(RuntimeError):
    pass


@dataclass(frozen=True)
class CartPoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


def accelerations(state: CartPoleState, force: float) -> tuple[float, float]:
    """Cart and pole angular accelerations for an applied horizontal force."""
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = (force + POLE_MASS_LENGTH * state.theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t ** 2 / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    return x_acc, theta_acc


def integrate(state: CartPoleState, force: float, tau: float = TAU) -> CartPoleState:
    """One explicit Euler step; positions advance with the old velocities."""
    x_acc, theta_acc = accelerations(state, force)
    return CartPoleState(
        state.x + tau * state.x_dot,
        state.x_dot + tau * x_acc,
        state.theta + tau * state.theta_dot,
        state.theta_dot + tau * theta_acc,
    )


def out_of_bounds(state: CartPoleState) -> bool:
    return (abs(state.x) > X_LIMIT) or (abs(state.theta) > THETA_LIMIT)


def mechanical_energy(state: CartPoleState) -> float:
    """Kinetic plus potential energy of the frictionless cart and uniform pole."""
    ml = POLE_MASS_LENGTH
    kinetic = (0.5 * TOTAL_MASS * state.x_dot ** 2
               + ml * state.x_dot * state.theta_dot * math.cos(state.theta)
               + (2.0 / 3.0) * MASS_POLE * HALF_LENGTH ** 2 * state.theta_dot ** 2)
    return kinetic + ml * GRAVITY * math.cos(state.theta)


class CartPole:
    """Episodic environment. Observations are ``[x, x_dot, theta, theta_dot]``."""

    n_states = 4
    n_actions = 2

    def __init__(self, max_steps: int = MAX_STEPS):
        self.max_steps = max_steps
        self.state: CartPoleState | None = None
        self.step_count = 0
        self.done = True

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        v = rng.uniform(-RESET_BOUND, RESET_BOUND, size=4)
        self.state = CartPoleState(*(float(c) for c in v))
        self.step_count = 0
        self.done = False
        return self.state.as_array()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise UsageError("step() called on a finished episode; call reset() first")
        if action not in (0, 1):
            raise ValueError(f"action must be 0 or 1, got {action!r}")
        force = FORCE_MAG if action == 1 else -FORCE_MAG
        self.state = integrate(self.state, force)
        self.step_count += 1
        self.done = out_of_bounds(self.state) or self.step_count >= self.max_steps
        return self.state.as_array(), 1.0, self.done


TRAJECTORY_FIELDS = ("step", "x", "x_dot", "theta", "theta_dot", "action", "reward", "terminal")


def write_trajectory(path, rows) -> None:
    """Dump ``(step, state, action, reward, terminal)`` tuples as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_FIELDS)
        for step, state, action, reward, terminal in rows:
            w.writerow([step, *(repr(float(v)) for v in state), action, reward, int(terminal)])
