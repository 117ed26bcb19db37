"""Conformal classes through a fixed background metric.

Every density and weighted tensor is trivialized in the background scale, so
the background Levi-Civita connection acts on them componentwise. Replacing the
background by Omega^-2 times itself multiplies the trivialized components of a
weight-w object by Omega^-w (the scale, of weight 1, becomes s / Omega).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import NonPositiveFactor, NullVelocity, OnZeroLocus
from .geometry import (
    FD_STEP,
    FD_STEP_SECOND,
    MetricField,
    central_gradient,
    christoffel_at,
    curvature_at,
    metric_at,
)

ZERO_LOCUS_THRESHOLD = 1e-10
NULL_THRESHOLD = 1e-14

SPACELIKE = "spacelike"
TIMELIKE = "timelike"


@dataclass(frozen=True)
class Scale:
    """A real function on the chart (a weight-1 density in the background trivialization)."""

    value: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "scale"

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        h = FD_STEP * (1.0 + np.linalg.norm(x))
        return central_gradient(lambda y: np.array(self.value(y), dtype=float), x, h)

    def hess(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(x), dtype=float)
        h = FD_STEP_SECOND * (1.0 + np.linalg.norm(x))
        H = central_gradient(self.grad, x, h)
        return 0.5 * (H + H.T)

    @property
    def analytic(self) -> bool:
        return self.gradient is not None and self.hessian is not None

    @classmethod
    def constant(cls, c: float, dim: int) -> "Scale":
        c = float(c)
        zero = np.zeros(dim)
        zero2 = np.zeros((dim, dim))
        return cls(lambda x: c, lambda x: zero, lambda x: zero2, name=f"constant({c:g})")

    @classmethod
    def exp_linear(cls, k) -> "Scale":
        """exp(k . x), handy as a positive rescaling factor."""
        k = np.asarray(k, dtype=float)
        return cls(
            lambda x: float(np.exp(k @ x)),
            lambda x: np.exp(k @ x) * k,
            lambda x: np.exp(k @ x) * np.outer(k, k),
            name="exp_linear",
        )

    def divided_by(self, other: "Scale") -> "Scale":
        """The quotient self / other, with analytic derivatives when both factors have them."""

        def value(x):
            return self.value(x) / other.value(x)

        if not (self.analytic and other.analytic):
            return Scale(value, name=f"{self.name}/{other.name}")

        def gradient(x):
            w = other.value(x)
            return self.grad(x) / w - self.value(x) * other.grad(x) / w**2

        def hessian(x):
            s, w = self.value(x), other.value(x)
            ds, dw = self.grad(x), other.grad(x)
            inv_grad = -dw / w**2
            inv_hess = -other.hess(x) / w**2 + 2.0 * np.outer(dw, dw) / w**3
            return (
                self.hess(x) / w
                + np.outer(ds, inv_grad)
                + np.outer(inv_grad, ds)
                + s * inv_hess
            )

        return Scale(value, gradient, hessian, name=f"{self.name}/{other.name}")


def conformal_rescale(M: MetricField, f: Scale, name: Optional[str] = None) -> MetricField:
    """The metric f^-2 M, with analytic partials whenever the inputs provide them."""

    def factor(x):
        v = f(x)
        if abs(v) < ZERO_LOCUS_THRESHOLD * max(1.0, float(np.max(np.abs(M.components(x))))):
            raise OnZeroLocus(f"rescaling factor {f.name} vanishes at {x}")
        return v

    def components(x):
        return M.components(x) / factor(x) ** 2

    partials = second_partials = None
    if M.partials is not None and f.gradient is not None:

        def partials(x):
            v = factor(x)
            G = M.components(x)
            return M.partials(x) / v**2 - 2.0 * np.einsum("c,ab->cab", f.grad(x), G) / v**3

    if M.partials is not None and M.second_partials is not None and f.analytic:

        def second_partials(x):
            v = factor(x)
            G, dG, d2G = M.components(x), M.partials(x), M.second_partials(x)
            df, d2f = f.grad(x), f.hess(x)
            return (
                d2G / v**2
                - 2.0 * np.einsum("d,cab->cdab", df, dG) / v**3
                - 2.0 * np.einsum("c,dab->cdab", df, dG) / v**3
                - 2.0 * np.einsum("cd,ab->cdab", d2f, G) / v**3
                + 6.0 * np.einsum("c,d,ab->cdab", df, df, G) / v**4
            )

    return MetricField(
        dim=M.dim,
        components=components,
        partials=partials,
        second_partials=second_partials,
        signature=M.signature,
        domain=M.domain,
        name=name or f"{f.name}^-2 {M.name}",
    )


@dataclass(frozen=True)
class AlmostPRStructure:
    """A conformal class (via its background representative) together with a scale that may vanish."""

    background: MetricField
    scale: Scale
    name: str = "structure"

    @property
    def dim(self) -> int:
        return self.background.dim

    @cached_property
    def singular_metric(self) -> MetricField:
        return conformal_rescale(self.background, self.scale, name=f"{self.name}:singular")

    def on_zero_locus(self, x, threshold: float = ZERO_LOCUS_THRESHOLD) -> bool:
        g, _ = metric_at(self.background, x)
        return abs(self.scale(x)) < threshold * max(1.0, float(np.max(np.abs(g))))


def singular_metric_at(S: AlmostPRStructure, x) -> np.ndarray:
    if S.on_zero_locus(x):
        raise OnZeroLocus(f"scale vanishes at {np.asarray(x)}")
    g, _ = metric_at(S.background, x)
    return g / S.scale(x) ** 2


@dataclass(frozen=True)
class WeightedKinematics:
    sigma_u: float
    u: np.ndarray  # weighted velocity, weight -1
    a: np.ndarray  # weighted acceleration, weight -2
    causal_type: str
    a_cov: np.ndarray  # covariant acceleration D_t u of the input parametrisation

    @property
    def sign(self) -> int:
        """+1 for spacelike, -1 for timelike (the value of u.u)."""
        return 1 if self.causal_type == SPACELIKE else -1


def covariant_acceleration(M: MetricField, x, u, a) -> np.ndarray:
    gamma = christoffel_at(M, x)
    return np.asarray(a, dtype=float) + np.einsum("abc,b,c->a", gamma, u, u)


def weighted_kinematics(S: AlmostPRStructure | MetricField, x, u, a=None) -> WeightedKinematics:
    """Weighted velocity and acceleration of the curve through ``x`` with coordinate
    velocity ``u`` and coordinate acceleration ``a`` (second derivative of the chart
    coordinates), computed in the background scale."""
    M = S.background if isinstance(S, AlmostPRStructure) else S
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    g, _ = metric_at(M, x)
    uu = float(u @ g @ u)
    if abs(uu) <= NULL_THRESHOLD * max(1.0, float(np.max(np.abs(g)))) * float(u @ u):
        raise NullVelocity(f"g(u, u) = {uu:.3e} at {x}")
    eps = 1 if uu > 0 else -1
    sigma_u = np.sqrt(eps * uu)
    if a is None:
        a = np.zeros_like(u)
    A = covariant_acceleration(M, x, u, a)
    a_perp = A - (float(u @ g @ A) / uu) * u
    return WeightedKinematics(
        sigma_u=float(sigma_u),
        u=u / sigma_u,
        a=a_perp / sigma_u**2,
        causal_type=SPACELIKE if eps > 0 else TIMELIKE,
        a_cov=A,
    )


def ae_tensor(S: AlmostPRStructure, x) -> np.ndarray:
    """Trace-free part of nabla_a nabla_b s + P_ab s in the background trivialization."""
    x = np.asarray(x, dtype=float)
    pack = curvature_at(S.background, x)
    s = S.scale(x)
    hess = S.scale.hess(x) - np.einsum("cab,c->ab", pack.christoffel, S.scale.grad(x))
    T = hess + pack.schouten * s
    T = 0.5 * (T + T.T)
    trace = float(np.einsum("ab,ab->", pack.metric_inv, T))
    return T - trace / S.dim * pack.metric


def ae_residual(S: AlmostPRStructure, x) -> float:
    return float(np.max(np.abs(ae_tensor(S, x))))


def laplacian(S: AlmostPRStructure, x) -> float:
    """Background Laplacian g^ab nabla_a nabla_b s."""
    g, ginv = metric_at(S.background, x)
    gamma = christoffel_at(S.background, x)
    hess = S.scale.hess(x) - np.einsum("cab,c->ab", gamma, S.scale.grad(x))
    return float(np.einsum("ab,ab->", ginv, hess))


def _guard_positive(omega: Scale) -> Scale:
    def value(x):
        v = omega.value(x)
        if not v > 0:
            raise NonPositiveFactor(f"rescaling factor {omega.name} = {v} at {x}")
        return v

    return Scale(value, omega.gradient, omega.hessian, name=omega.name)


def rebase_background(S: AlmostPRStructure, omega: Scale, probe=None) -> AlmostPRStructure:
    """Same conformal class and scale, expressed with background Omega^-2 times the old one."""
    n = S.dim
    probes = [np.zeros(n)] if probe is None else [np.asarray(p, dtype=float) for p in np.atleast_2d(probe)]
    for p in probes:
        if S.background.contains(p) and not omega(p) > 0:
            raise NonPositiveFactor(f"rescaling factor {omega.name} = {omega(p)} at {p}")
    omega = _guard_positive(omega)
    return AlmostPRStructure(
        background=conformal_rescale(S.background, omega, name=f"{S.background.name}/{omega.name}^2"),
        scale=S.scale.divided_by(omega),
        name=f"{S.name}|{omega.name}",
    )


@dataclass(frozen=True)
class WeightedTensor:
    """Components of a weighted tensor field value in the background trivialization.

    ``valence`` is a string of 'u'/'d' characters naming upper and lower indices.
    It does not affect rescaling: only the density weight does.
    """

    components: np.ndarray
    weight: float
    valence: str = ""

    def rescaled(self, omega_value: float) -> "WeightedTensor":
        """Components after the background is replaced by omega^-2 times itself."""
        if not omega_value > 0:
            raise NonPositiveFactor(f"rescaling factor {omega_value}")
        return WeightedTensor(
            np.asarray(self.components) * omega_value ** (-self.weight), self.weight, self.valence
        )
