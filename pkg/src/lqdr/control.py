"""Control laws: optimal, stationary, receding-horizon, and two baselines.

The optimal laws all have the shape u = -(gain) x - (inverse) h, differing
only in where the gain and feedforward come from.  The two baselines exist
for benchmark comparisons: a state-feedback law with a static disturbance
compensation gain, and a positional PID acting on the regulated-output
error.

``build_controller`` turns a declarative ControllerConfig into a stepping
function ``(k, x, d_k) -> u`` with all solves done up front (except for the
receding-horizon law, which by construction resolves its backward equations
at every step).
"""

from dataclasses import dataclass

import numpy as np

from .feedforward import solve_recursive, solve_steady
from .model import CostSpec, DisturbanceProfile
from .riccati import PINV_RCOND, solve_finite_horizon, solve_gare

KINDS = ("finite_horizon", "stationary", "receding_horizon",
         "state_feedback_compensation", "pid")

_KIND_ALIASES = {
    "finitehorizon": "finite_horizon",
    "recedinghorizon": "receding_horizon",
    "statefeedbackcompensation": "state_feedback_compensation",
    "sfc": "state_feedback_compensation",
}


def canonical_kind(kind):
    """Map CamelCase or snake_case controller names onto the canonical set."""
    key = str(kind).replace("_", "").replace("-", "").lower()
    key = _KIND_ALIASES.get(key, key).replace("_", "")
    for known in KINDS:
        if key == known.replace("_", ""):
            return known
    raise ValueError(f"unknown controller kind {kind!r}")


@dataclass(frozen=True)
class ControllerState:
    """PID memory: integral accumulator, previous error, step counter."""

    integral: np.ndarray
    prev_error: np.ndarray
    step: int = 0

    @classmethod
    def initial(cls, dim):
        return cls(integral=np.zeros(dim), prev_error=np.zeros(dim), step=0)


@dataclass(frozen=True)
class ControllerConfig:
    """Declarative description of one controller in a scenario.

    Fields are kind-specific: ``T``/``P_terminal``/``strict`` for the
    optimal laws, ``k_x``/``K_d`` for state-feedback compensation, and the
    three gains plus ``Ts`` for PID.
    """

    kind: str
    label: str = None
    T: int = None
    P_terminal: np.ndarray = None
    strict: bool = True
    k_x: np.ndarray = None
    K_d: np.ndarray = None
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    Ts: float = None
    gare_tol: float = 1e-12
    gare_max_iters: int = 100000

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.label is None:
            object.__setattr__(self, "label", self.kind)


def finite_horizon_control(k, x, riccati, ff):
    """Optimal input at step k: u = -K_k x - Upsilon_k^{-1} h_k."""
    if not 0 <= k <= riccati.horizon:
        raise IndexError(f"step {k} outside horizon 0..{riccati.horizon}")
    return -riccati.K[k] @ x - riccati.upsilon_solve(k, ff.h[k])


def stationary_control(x, gare, h):
    """Stabilizing input u = -K x - Upsilon^+ h (pure regulation when h = 0)."""
    pinv = np.linalg.pinv(gare.Upsilon, rcond=PINV_RCOND)
    return -gare.K @ x - pinv @ np.asarray(h, dtype=float).reshape(-1)


def receding_horizon_control(x, d_now, model, cost, T, P_terminal=None, strict=True):
    """First input of a T-step lookahead with the disturbance frozen at d_now.

    Solves the backward equations over the lookahead window with d held at
    its current value and terminal weight ``P_terminal`` (the cost's
    terminal weight when omitted), then applies only the first input.  The
    full backward pass is recomputed on every call; at the plant sizes this
    toolkit targets that is cheap, and it keeps the law a pure function of
    its arguments.
    """
    if T < 1:
        raise ValueError("lookahead T must be >= 1")
    if P_terminal is None:
        inner_cost = cost
    else:
        inner_cost = CostSpec(Q=cost.Q, R=cost.R, P_terminal=P_terminal, r=cost.r)
    riccati = solve_finite_horizon(model, inner_cost, T, strict=strict)
    d_now = np.asarray(d_now, dtype=float).reshape(-1)
    frozen = np.tile(d_now, (T + 1, 1))
    ff = solve_recursive(riccati, model, inner_cost, frozen)
    return finite_horizon_control(0, x, riccati, ff)


def sfc_control(x, d_now, k_x, K_d):
    """Baseline: state feedback plus static disturbance compensation.

    u = k_x x + K_d d.  The compensating gain is fed the true disturbance
    (rather than an observer estimate), which can only flatter this
    baseline in comparisons.
    """
    k_x = np.atleast_2d(np.asarray(k_x, dtype=float))
    K_d = np.atleast_2d(np.asarray(K_d, dtype=float))
    return k_x @ np.asarray(x, dtype=float) + K_d @ np.asarray(d_now, dtype=float).reshape(-1)


def pid_control(state, error, Ts, kp, ki, kd):
    """Positional discrete PID on the regulated-output error.

    u = kp * e + ki * (accumulated e * Ts) + kd * (e - e_prev) / Ts, with the
    integral including the current sample.  Returns the input and the
    updated state; callers own the state and thread it through the loop.
    """
    if Ts <= 0:
        raise ValueError("sample time must be positive")
    error = np.asarray(error, dtype=float).reshape(-1)
    integral = state.integral + error * Ts
    u = kp * error + ki * integral + kd * (error - state.prev_error) / Ts
    return u, ControllerState(integral=integral, prev_error=error, step=state.step + 1)


def build_controller(config, model, cost, profile, steps):
    """Make a stepping function ``(k, x, d_k) -> u`` for one configuration.

    Solver work that can be done once (Riccati, stationary equation,
    steady feedforward) happens here, so errors surface before the
    simulation starts.
    """
    kind = config.kind
    if kind == "finite_horizon":
        riccati = solve_finite_horizon(model, cost, steps - 1, strict=config.strict)
        ff = solve_recursive(riccati, model, cost, profile)

        def step(k, x, d_now):
            return finite_horizon_control(k, x, riccati, ff)

    elif kind == "stationary":
        gare = solve_gare(model, cost, tol=config.gare_tol,
                          max_iters=config.gare_max_iters)
        d_limit = profile.limit_value() if isinstance(profile, DisturbanceProfile) \
            else np.asarray(profile, dtype=float)[-1]
        h, _ = solve_steady(gare, model, cost, d_limit, cost.r)

        def step(k, x, d_now):
            return stationary_control(x, gare, h)

    elif kind == "receding_horizon":
        if config.T is None:
            raise ValueError("receding_horizon needs a lookahead length T")

        def step(k, x, d_now):
            return receding_horizon_control(x, d_now, model, cost, config.T,
                                            P_terminal=config.P_terminal,
                                            strict=config.strict)

    elif kind == "state_feedback_compensation":
        if config.k_x is None or config.K_d is None:
            raise ValueError("state_feedback_compensation needs gains k_x and K_d")

        def step(k, x, d_now):
            return sfc_control(x, d_now, config.k_x, config.K_d)

    else:  # pid
        if config.Ts is None:
            raise ValueError("pid needs a sample time Ts")
        if model.l != model.m:
            raise ValueError("pid pairs each regulated output with one input; "
                             f"got l={model.l}, m={model.m}")
        box = {"state": ControllerState.initial(model.l)}
        target = model.c_o @ cost.r

        def step(k, x, d_now):
            error = target - model.c_o @ x
            u, box["state"] = pid_control(box["state"], error, config.Ts,
                                          config.kp, config.ki, config.kd)
            return u

    return step
