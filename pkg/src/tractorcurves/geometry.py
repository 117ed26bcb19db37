"""Chart-based metric geometry: metric evaluation, Christoffel symbols and curvature.

Array conventions used throughout the package:

* ``dg[c, a, b]`` is the partial derivative d_c g_ab,
* ``d2g[c, d, a, b]`` is d_c d_d g_ab,
* ``gamma[a, b, c]`` is the Christoffel symbol Gamma^a_bc,
* ``riemann[a, b, c, d]`` is R^a_bcd with
  R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z, so that
  R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb,
* Ricci is R_bd = R^a_bad and the Schouten tensor is
  P_ab = (R_ab - Scal g_ab / (2(n-1))) / (n-2).

With these choices the unit round sphere has P = g/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionTooLow, OutOfChart, SingularMetric, StepTooLarge

DET_THRESHOLD = 1e-12
FD_STEP = 1e-4
FD_STEP_SECOND = 1e-3

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MetricField:
    """A metric given by its component matrix on an open chart domain.

    ``partials`` and ``second_partials`` are optional analytic derivatives; when
    missing, central differences are used. ``domain`` is a predicate on chart
    points (``None`` means the whole of R^n).
    """

    dim: int
    components: ArrayFn
    partials: Optional[ArrayFn] = None
    second_partials: Optional[ArrayFn] = None
    signature: Optional[tuple[int, int]] = None
    domain: Optional[Callable[[np.ndarray], bool]] = None
    name: str = "metric"

    def __post_init__(self):
        if self.signature is None:
            object.__setattr__(self, "signature", (self.dim, 0))
        p, q = self.signature
        if p + q != self.dim:
            raise ValueError(f"signature {self.signature} does not match dim {self.dim}")

    def contains(self, x) -> bool:
        return self.domain is None or bool(self.domain(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class CurvaturePack:
    metric: np.ndarray
    metric_inv: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray
    schouten_trace: float

    @property
    def J(self) -> float:
        return self.schouten_trace

    def schouten_mixed(self) -> np.ndarray:
        """P^a_b = g^ac P_cb."""
        return self.metric_inv @ self.schouten


def _point(M: MetricField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (M.dim,):
        raise ValueError(f"expected a point of dimension {M.dim}, got shape {x.shape}")
    if not M.contains(x):
        raise OutOfChart(f"{x} lies outside the chart domain of {M.name}")
    return x


def _fd_step(x: np.ndarray, base: float) -> float:
    return base * (1.0 + float(np.linalg.norm(x)))


def _check_stencil(M: MetricField, x: np.ndarray, h: float) -> None:
    if M.domain is None:
        return
    for i in range(M.dim):
        for sgn in (1.0, -1.0):
            y = x.copy()
            y[i] += sgn * h
            if not M.domain(y):
                raise StepTooLarge(f"finite-difference step {h:g} leaves the chart at {x}")


def central_gradient(f: ArrayFn, x: np.ndarray, h: float) -> np.ndarray:
    """Second-order central differences of an array-valued ``f``; derivative axis first."""
    out = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.stack(out)


def metric_at(M: MetricField, x) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(g_ab, g^ab)`` at ``x``."""
    x = _point(M, x)
    g = np.asarray(M.components(x), dtype=float)
    g = 0.5 * (g + g.T)
    det = np.linalg.det(g)
    if not np.isfinite(det) or abs(det) < DET_THRESHOLD:
        raise SingularMetric(f"|det g| = {abs(det):.3e} at {x}")
    return g, np.linalg.inv(g)


def check_signature(M: MetricField, x) -> bool:
    g, _ = metric_at(M, x)
    q = int(np.sum(np.linalg.eigvalsh(g) < 0))
    return (M.dim - q, q) == tuple(M.signature)


def metric_partials(M: MetricField, x, h: Optional[float] = None) -> np.ndarray:
    x = _point(M, x)
    if M.partials is not None:
        return np.asarray(M.partials(x), dtype=float)
    h = _fd_step(x, FD_STEP) if h is None else h
    _check_stencil(M, x, h)
    return central_gradient(M.components, x, h)


def metric_second_partials(M: MetricField, x, h: Optional[float] = None) -> np.ndarray:
    x = _point(M, x)
    if M.second_partials is not None:
        return np.asarray(M.second_partials(x), dtype=float)
    h = _fd_step(x, FD_STEP_SECOND) if h is None else h
    _check_stencil(M, x, h)
    d2g = central_gradient(lambda y: metric_partials(M, y), x, h)
    return 0.5 * (d2g + d2g.transpose(1, 0, 2, 3))


def _christoffel(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # Gamma_{d,bc} = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    lower = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    return np.einsum("ad,dbc->abc", ginv, lower)


def christoffel_at(M: MetricField, x, h: Optional[float] = None) -> np.ndarray:
    """Levi-Civita Christoffel symbols ``gamma[a, b, c]``."""
    _, ginv = metric_at(M, x)
    return _christoffel(ginv, metric_partials(M, x, h))


def curvature_at(M: MetricField, x) -> CurvaturePack:
    n = M.dim
    if n < 3:
        raise DimensionTooLow(f"curvature needs n >= 3, got n = {n}")
    g, ginv = metric_at(M, x)
    dg = metric_partials(M, x)
    d2g = metric_second_partials(M, x)
    gamma = _christoffel(ginv, dg)

    # d_e g^ad = -g^ap d_e g_pq g^qd
    dginv = -np.einsum("ap,epq,qd->ead", ginv, dg, ginv)
    lower = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    dlower = 0.5 * (
        d2g.transpose(0, 2, 1, 3) + d2g.transpose(0, 2, 3, 1) - d2g
    )  # [e, d, b, c] = d_e Gamma_{d,bc}
    dgamma = np.einsum("ead,dbc->eabc", dginv, lower) + np.einsum("ad,edbc->eabc", ginv, dlower)

    riemann = (
        np.einsum("cadb->abcd", dgamma)
        - np.einsum("dacb->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    ricci = np.einsum("abad->bd", riemann)
    ricci = 0.5 * (ricci + ricci.T)
    scal = float(np.einsum("ab,ab->", ginv, ricci))
    schouten = (ricci - scal / (2.0 * (n - 1)) * g) / (n - 2)
    J = float(np.einsum("ab,ab->", ginv, schouten))
    return CurvaturePack(g, ginv, gamma, riemann, ricci, scal, schouten, J)


def bianchi_residual(pack: CurvaturePack) -> float:
    """Max-abs of R^a_[bcd]."""
    R = pack.riemann
    cyc = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc)))


def metric_compatibility_residual(M: MetricField, x) -> float:
    """Max-abs of nabla_a g_bc assembled from the Christoffel symbols."""
    g, _ = metric_at(M, x)
    dg = metric_partials(M, x)
    gamma = christoffel_at(M, x)
    nabla = dg - np.einsum("dab,dc->abc", gamma, g) - np.einsum("dac,bd->abc", gamma, g)
    return float(np.max(np.abs(nabla)))


def flat_metric(dim: int, signature: Optional[tuple[int, int]] = None) -> MetricField:
    """Constant diagonal metric with ``q`` leading minus signs."""
    signature = signature or (dim, 0)
    diag = np.array([-1.0] * signature[1] + [1.0] * signature[0])
    G = np.diag(diag)
    zeros3 = np.zeros((dim, dim, dim))
    zeros4 = np.zeros((dim, dim, dim, dim))
    return MetricField(
        dim=dim,
        components=lambda x: G,
        partials=lambda x: zeros3,
        second_partials=lambda x: zeros4,
        signature=signature,
        name="flat" if signature[1] == 0 else "minkowski",
    )
