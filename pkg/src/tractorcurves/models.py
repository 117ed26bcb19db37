"""Closed-form model structures used as oracles.

All three Einstein models share the flat background and differ only in the scale:
euclidean s = 1, sphere s = (1 + |x|^2)/2 (stereographic chart of the unit
sphere), hyperbolic s = (1 - |x|^2)/2 (Poincare ball, defined past |x| = 1 so
curves can cross the zero locus). The anisotropic control metric
diag(1 + sin(x_2)/2, 1, ..., 1) with s = 1 is not Einstein.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conformal import AlmostPRStructure, Scale
from .errors import DimensionTooLow, OnZeroLocus, UnknownModel
from .geometry import CurvaturePack, MetricField, flat_metric

MODEL_NAMES = ("euclidean", "sphere", "hyperbolic", "anisotropic")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dim: int
    structure: AlmostPRStructure
    schouten_factor: Optional[float]  # lambda with P = lambda g for the singular metric
    J: Optional[float]
    hII: Optional[float]
    einstein: bool

    @property
    def background(self) -> MetricField:
        return self.structure.background

    @property
    def scale(self) -> Scale:
        return self.structure.scale


def _ball(radius: float):
    return lambda x: float(x @ x) < radius**2


def _anisotropic_metric(dim: int) -> MetricField:
    def comps(x):
        g = np.eye(dim)
        g[0, 0] = 1.0 + 0.5 * np.sin(x[1])
        return g

    def partials(x):
        dg = np.zeros((dim, dim, dim))
        dg[1, 0, 0] = 0.5 * np.cos(x[1])
        return dg

    def second(x):
        d2g = np.zeros((dim, dim, dim, dim))
        d2g[1, 1, 0, 0] = -0.5 * np.sin(x[1])
        return d2g

    return MetricField(dim, comps, partials, second, name="anisotropic")


def make_model(name: str, dim: int, margin: float = 0.05, allow_low_dim: bool = False) -> ModelSpec:
    """Build a registered model. ``margin`` widens the hyperbolic chart to |x| < 1 + margin."""
    if name not in MODEL_NAMES:
        raise UnknownModel(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    if dim < 2 or (dim < 3 and not allow_low_dim):
        raise DimensionTooLow(f"model dimension must be >= 3, got {dim}")
    eye = np.eye(dim)
    if name == "euclidean":
        S = AlmostPRStructure(flat_metric(dim), Scale.constant(1.0, dim), name="euclidean")
        return ModelSpec(name, dim, S, 0.0, 0.0, 0.0, True)
    if name == "sphere":
        scale = Scale(lambda x: 0.5 * (1.0 + x @ x), lambda x: x.copy(), lambda x: eye, name="sphere")
        S = AlmostPRStructure(flat_metric(dim), scale, name="sphere")
        return ModelSpec(name, dim, S, 0.5, dim / 2.0, -1.0, True)
    if name == "hyperbolic":
        bg = flat_metric(dim)
        bg = MetricField(dim, bg.components, bg.partials, bg.second_partials, domain=_ball(1.0 + margin), name="flat")
        scale = Scale(lambda x: 0.5 * (1.0 - x @ x), lambda x: -x, lambda x: -eye, name="hyperbolic")
        S = AlmostPRStructure(bg, scale, name="hyperbolic")
        return ModelSpec(name, dim, S, -0.5, -dim / 2.0, 1.0, True)
    S = AlmostPRStructure(_anisotropic_metric(dim), Scale.constant(1.0, dim), name="anisotropic")
    return ModelSpec(name, dim, S, None, None, None, False)


def analytic_reference(model: ModelSpec, x) -> CurvaturePack:
    """Closed-form Christoffels, Ricci, Schouten and J of the model's singular metric.

    Conformally flat models use g = e^{2w} delta with w = -log s, for which
    Gamma^a_bc = d_b w delta^a_c + d_c w delta^a_b - delta_bc d^a w and
    P = Hess(s)/s - |grad s|^2/(2 s^2) delta. The Riemann slot is left empty (zeros).
    """
    x = np.asarray(x, dtype=float)
    n = model.dim
    if model.name == "anisotropic":
        return _anisotropic_reference(x, n)
    s = model.scale(x)
    if abs(s) < 1e-12:
        raise OnZeroLocus(f"scale vanishes at {x}")
    ds = model.scale.grad(x)
    H = model.scale.hess(x)
    eye = np.eye(n)
    g = eye / s**2
    dw = -ds / s
    gamma = np.einsum("b,ac->abc", dw, eye) + np.einsum("c,ab->abc", dw, eye) - np.einsum("bc,a->abc", eye, dw)
    P = H / s - 0.5 * (ds @ ds) / s**2 * eye
    ginv = eye * s**2
    J = float(np.trace(ginv @ P))
    ricci = (n - 2) * P + J * g
    scal = 2.0 * (n - 1) * J
    return CurvaturePack(g, ginv, gamma, np.zeros((n,) * 4), ricci, scal, P, J)


def _anisotropic_reference(x: np.ndarray, n: int) -> CurvaturePack:
    # g = f(y) dx^2 + dy^2 + flat, y = x[1]; the (x, y) plane has Gauss curvature K
    y = x[1]
    f, f1, f2 = 1.0 + 0.5 * np.sin(y), 0.5 * np.cos(y), -0.5 * np.sin(y)
    K = (f1**2 - 2.0 * f * f2) / (4.0 * f**2)
    g = np.eye(n)
    g[0, 0] = f
    ginv = np.linalg.inv(g)
    gamma = np.zeros((n, n, n))
    gamma[0, 0, 1] = gamma[0, 1, 0] = f1 / (2.0 * f)
    gamma[1, 0, 0] = -f1 / 2.0
    ricci = np.zeros((n, n))
    ricci[0, 0] = K * f
    ricci[1, 1] = K
    scal = 2.0 * K
    P = (ricci - scal / (2.0 * (n - 1)) * g) / (n - 2)
    J = float(np.einsum("ab,ab->", ginv, P))
    return CurvaturePack(g, ginv, gamma, np.zeros((n,) * 4), ricci, scal, P, J)


def random_interior_points(model: ModelSpec, count: int, rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
    """Uniform points in the ball of the given radius (kept inside the hyperbolic zero locus)."""
    n = model.dim
    v = rng.normal(size=(count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return v * r


def random_unit_vectors(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
