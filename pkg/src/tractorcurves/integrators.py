"""Fixed-step RK4 and adaptive Dormand-Prince 5(4) integrators.

Both drivers share one loop so that stop predicates, periodic renormalization
and forced landing times behave identically for either method.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import IntegratorFailure, OnZeroLocus, OutOfChart, SingularMetric, StepTooLarge

METHODS = ("rk4_fixed", "rk45_adaptive")

# Raised by the right-hand side when a stage leaves the region where the flow is defined.
DOMAIN_ERRORS = (OutOfChart, StepTooLarge, OnZeroLocus, SingularMetric)


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45_adaptive"
    step: float = 1e-2
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 1e-2
    t_max: float = 10.0
    max_steps: int = 1_000_000
    renormalize_every: int = 100
    stop_on_domain_exit: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name in ("step", "rtol", "atol", "max_step", "t_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def with_(self, **kw) -> "IntegratorConfig":
        return replace(self, **kw)


@dataclass
class Solution:
    ts: np.ndarray
    ys: np.ndarray
    status: str = "t_max"
    info: dict = field(default_factory=dict)


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dopri_step(f, t, y, h, k1):
    """One Dormand-Prince step; returns (y5, error_vector, f(t+h, y5))."""
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(t + _C[i] * h, yi))
    y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y5, err, ks[6]


def solve(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    cfg: IntegratorConfig,
    t_end: Optional[float] = None,
    stop: Optional[Callable[[float, np.ndarray], bool]] = None,
    post_step: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    landing: Optional[Sequence[float]] = None,
) -> Solution:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t_end`` (default ``t0 + cfg.t_max``).

    ``stop(t, y)`` is checked after every accepted step; the step that triggers
    it is kept. ``post_step`` is applied every ``cfg.renormalize_every`` steps.
    ``landing`` lists times the integrator must hit exactly.
    """
    t_end = t0 + cfg.t_max if t_end is None else t_end
    y = np.array(y0, dtype=float)
    t = float(t0)
    ts, ys = [t], [y.copy()]
    marks = sorted(float(s) for s in (() if landing is None else landing) if t0 < s < t_end) + [t_end]
    mark_i = 0
    status = "t_max"
    adaptive = cfg.method == "rk45_adaptive"
    h = min(cfg.step, cfg.max_step) if adaptive else cfg.step
    k1 = None
    n_steps = n_rejected = 0
    span = abs(t_end - t0)

    while t < t_end - 1e-14 * max(1.0, span):
        if n_steps >= cfg.max_steps:
            status = "max_steps"
            break
        target = marks[mark_i]
        h_try = min(h, target - t)
        try:
            if adaptive:
                if k1 is None:
                    k1 = f(t, y)
                y_new, err, k_last = dopri_step(f, t, y, h_try, k1)
                scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
                e = float(np.sqrt(np.mean((err / scale) ** 2)))
                if not np.isfinite(e):
                    raise IntegratorFailure(f"non-finite error estimate at t = {t}")
                if e > 1.0:
                    n_rejected += 1
                    h = h_try * max(0.2, 0.9 * e ** -0.2)
                    if h < 1e-14 * max(1.0, abs(t)):
                        raise IntegratorFailure(f"step size underflow at t = {t}")
                    continue
                grow = 5.0 if e == 0.0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
                h_next = min(cfg.max_step, h_try * grow)
            else:
                y_new = rk4_step(f, t, y, h_try)
                k_last = None
                h_next = cfg.step
        except DOMAIN_ERRORS:
            if not cfg.stop_on_domain_exit:
                raise
            status = "domain_exit"
            break
        if not np.all(np.isfinite(y_new)):
            raise IntegratorFailure(f"non-finite state at t = {t}")

        landed = h_try == target - t
        t = target if landed else t + h_try
        if landed:
            mark_i = min(mark_i + 1, len(marks) - 1)
        y = y_new
        k1 = k_last
        n_steps += 1
        if post_step is not None and cfg.renormalize_every and n_steps % cfg.renormalize_every == 0:
            y = post_step(y)
            k1 = None
        ts.append(t)
        ys.append(y.copy())
        if adaptive:
            # keep the proposed step unless the last one was clipped by a landing time
            h = max(h_next, h) if landed and h_try < h else h_next
        if stop is not None and stop(t, y):
            status = "stopped"
            break

    return Solution(np.array(ts), np.array(ys), status, {"steps": n_steps, "rejected": n_rejected})
