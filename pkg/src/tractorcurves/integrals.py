"""First integrals of generalised geodesics from conformal Killing-Yano 2-forms.

For a weight-3 two-form k (trivialized in the background) the evaluated quantity is

    F = k_ab u^a a^b - eps / (n - 1) u^a nabla^p k_pa,     eps = u.u = +-1,

with u, a the weighted velocity and acceleration in the background scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .conformal import AlmostPRStructure, Scale, rebase_background, weighted_kinematics
from .curves import CurveState, CurveTrace, sigma_array, sigma_parallel_residual
from .errors import OnZeroLocus
from .geometry import FD_STEP, central_gradient, christoffel_at, metric_at
from .tractor import TractorWedge, pairing_arrays, tractor_metric_matrix, transport_wedge

CKY_WEIGHT = 3


@dataclass(frozen=True)
class TwoFormField:
    """Antisymmetric k_ab(x); ``partials(x)[c, a, b]`` is d_c k_ab when given."""

    k: Callable[[np.ndarray], np.ndarray]
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "k"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.k(np.asarray(x, dtype=float)), dtype=float)

    def d(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.partials is not None:
            return np.asarray(self.partials(x), dtype=float)
        return central_gradient(self.k, x, FD_STEP * (1.0 + np.linalg.norm(x)))

    def rescaled(self, omega: Scale, weight: float = CKY_WEIGHT) -> "TwoFormField":
        """Components after the background becomes omega^-2 times itself."""
        base = self

        def k(x):
            return base(x) * omega(x) ** (-weight)

        partials = None
        if base.partials is not None and omega.gradient is not None:

            def partials(x):
                w = omega(x)
                return base.d(x) * w ** (-weight) - weight * w ** (-weight - 1) * np.einsum(
                    "c,ab->cab", omega.grad(x), base(x)
                )

        return TwoFormField(k, partials, name=f"{self.name}|{omega.name}")


def constant_two_form(K) -> TwoFormField:
    K = np.asarray(K, dtype=float)
    K = 0.5 * (K - K.T)
    n = K.shape[0]
    zero = np.zeros((n, n, n))
    return TwoFormField(lambda x: K, lambda x: zero, name="constant")


def position_wedge(w) -> TwoFormField:
    """k_bc = x_b w_c - x_c w_b (chart coordinates lowered with delta)."""
    w = np.asarray(w, dtype=float)
    n = w.size
    eye = np.eye(n)
    dk = np.einsum("cb,e->cbe", eye, w) - np.einsum("ce,b->cbe", eye, w)
    return TwoFormField(lambda x: np.outer(x, w) - np.outer(w, x), lambda x: dk, name="x^w")


def squared_coordinate_form(n: int, i: int = 0, j: int = 1) -> TwoFormField:
    """x_i^2 e_i ^ e_j: not conformal Killing-Yano (negative control)."""
    E = np.zeros((n, n))
    E[i, j], E[j, i] = 1.0, -1.0

    def partials(x):
        dk = np.zeros((n, n, n))
        dk[i] = 2.0 * x[i] * E
        return dk

    return TwoFormField(lambda x: x[i] ** 2 * E, partials, name=f"x{i + 1}^2 e{i + 1}^e{j + 1}")


def covariant_derivative(S: AlmostPRStructure, k: TwoFormField, x) -> np.ndarray:
    """nabla_a k_bc as array [a, b, c] (background Levi-Civita, componentwise on densities)."""
    gamma = christoffel_at(S.background, x)
    K = k(x)
    return k.d(x) - np.einsum("dab,dc->abc", gamma, K) - np.einsum("dac,bd->abc", gamma, K)


def divergence(S: AlmostPRStructure, k: TwoFormField, x) -> np.ndarray:
    """nabla^p k_pa."""
    _, ginv = metric_at(S.background, x)
    return np.einsum("qp,qpa->a", ginv, covariant_derivative(S, k, x))


def cky_residual(S: AlmostPRStructure, k: TwoFormField, x) -> float:
    """Max-abs of nabla_a k_bc - nabla_[a k_bc] + 2/(n-1) g_a[b nabla^p k_c]p."""
    n = S.dim
    g, _ = metric_at(S.background, x)
    Dk = covariant_derivative(S, k, x)
    alt = (Dk + Dk.transpose(1, 2, 0) + Dk.transpose(2, 0, 1)) / 3.0
    d = -divergence(S, k, x)  # nabla^p k_cp
    trace_part = (np.einsum("ab,c->abc", g, d) - np.einsum("ac,b->abc", g, d)) / (n - 1)
    return float(np.max(np.abs(Dk - alt + trace_part)))


def first_integral_value(S: AlmostPRStructure, k: TwoFormField, state: CurveState) -> float:
    n = S.dim
    wk = weighted_kinematics(S, state.x, state.u, state.acc)
    K = k(state.x)
    return float(wk.u @ K @ wk.a - wk.sign / (n - 1) * (wk.u @ divergence(S, k, state.x)))


def einstein_scale_integral(S: AlmostPRStructure, k: TwoFormField, state: CurveState) -> float:
    """u^a nabla^p k_pa computed in the scale of the singular metric s^-2 g.

    On interior geodesics this equals -(n - 1) eps times ``first_integral_value``.
    """
    x = np.asarray(state.x, dtype=float)
    if S.on_zero_locus(x):
        raise OnZeroLocus(f"scale vanishes at {x}")
    sign = 1.0 if S.scale(x) > 0 else -1.0
    omega = Scale(
        lambda y: sign * S.scale(y),
        lambda y: sign * S.scale.grad(y),
        lambda y: sign * S.scale.hess(y),
        name="|s|",
    )
    S2 = rebase_background(S, omega, probe=x)
    k2 = k.rescaled(omega)
    wk = weighted_kinematics(S2, x, state.u, state.acc)
    return float(wk.u @ divergence(S2, k2, x))


@dataclass
class FirstIntegralReport:
    values: np.ndarray
    initial: float
    max_abs_drift: float
    relative_drift: float
    name: str = "first_integral"
    warning: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, name: str = "first_integral", warning: Optional[str] = None) -> "FirstIntegralReport":
        values = np.asarray(values, dtype=float)
        initial = float(values[0])
        drift = float(np.max(np.abs(values - initial)))
        ref = max(abs(initial), float(np.max(np.abs(values))))
        rel = drift / ref if ref > 0 else 0.0
        return cls(values, initial, drift, rel, name, warning)

    def summary(self) -> dict:
        out = {
            "integral_name": self.name,
            "initial": self.initial,
            "max_abs_drift": self.max_abs_drift,
            "relative_drift": self.relative_drift,
            "samples": int(len(self.values)),
        }
        if self.warning:
            out["warning"] = self.warning
        return out


def conservation_report(S: AlmostPRStructure, k: TwoFormField, trace: CurveTrace, name: Optional[str] = None) -> FirstIntegralReport:
    values = [first_integral_value(S, k, st) for st in trace.states]
    return FirstIntegralReport.from_values(values, name or k.name)


def pairing_integral(
    S: AlmostPRStructure,
    trace: CurveTrace,
    T0: TractorWedge,
    circle_tol: float = 1e-6,
    name: str = "sigma_pairing",
) -> FirstIntegralReport:
    """Transport T0 along the trace and pair it with Sigma at every sample.

    Constancy is only guaranteed along conformal circles; otherwise the report
    carries a warning instead of raising.
    """
    transported = transport_wedge(S, trace, T0)
    values = []
    for st, T in zip(trace.states, transported):
        H = tractor_metric_matrix(T.metric)
        values.append(pairing_arrays(sigma_array(S, st), T.components, H))
    warning = None
    try:
        worst = float(np.max(sigma_parallel_residual(S, trace)))
    except Exception as exc:  # too few samples to judge
        worst, warning = float("nan"), f"could not verify conformal-circle precondition: {exc}"
    if worst > circle_tol:
        warning = f"trace is not a conformal circle (Sigma residual {worst:.2e}); drift not guaranteed"
    report = FirstIntegralReport.from_values(values, name, warning)
    report.extra["sigma_residual_max"] = worst
    return report
