"""Standard tractors in the background scale.

Tractor components are stored contravariantly in the basis (Y, Z_1, ..., Z_n, X):
index 0 carries the weight-1 slot sigma, indices 1..n carry mu^a and the last
index carries rho. In this basis the tractor metric is

    h = [[0, 0, 1], [0, g_ab, 0], [1, 0, 0]]

so X and Y are null and h(X, Y) = 1. Wedges use the normalized
antisymmetrization S^[A1..Ak] (1/k! convention), and the pairing of two rank-k
wedges is (1/k!) S^{A1..Ak} T_{A1..Ak}; with this pairing the wedge
k! S^[A1 .. Ak] of factors pairs to the Gram determinant of h on the factors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conformal import AlmostPRStructure, laplacian
from .errors import BasepointMismatch, IntegratorFailure, OutOfChart, RankMismatch, RankOverflow
from .geometry import FD_STEP_SECOND, CurvaturePack, curvature_at, metric_at
from .integrators import IntegratorConfig, solve

MAX_RANK = 4


def tractor_metric_matrix(g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    H = np.zeros((n + 2, n + 2))
    H[0, -1] = H[-1, 0] = 1.0
    H[1:-1, 1:-1] = g
    return H


def basis_vectors(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contravariant components of Y, X and the matrix whose rows are Z_1..Z_n."""
    E = np.eye(n + 2)
    return E[0], E[-1], E[1:-1]


@dataclass(frozen=True, eq=False)
class Tractor:
    """A tractor at ``basepoint``: sigma (weight 1), mu_a (index down), rho (weight -1).

    ``metric`` is the background metric at the basepoint, needed to raise mu.
    """

    sigma: float
    mu: np.ndarray
    rho: float
    basepoint: np.ndarray
    metric: np.ndarray

    def vector(self) -> np.ndarray:
        mu_up = np.linalg.solve(self.metric, np.asarray(self.mu, dtype=float))
        return np.concatenate([[self.sigma], mu_up, [self.rho]])

    @classmethod
    def from_vector(cls, v, basepoint, metric) -> "Tractor":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), metric @ v[1:-1], float(v[-1]), np.asarray(basepoint, dtype=float), metric)

    @property
    def rank(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class TractorWedge:
    components: np.ndarray
    basepoint: np.ndarray
    metric: np.ndarray

    @property
    def rank(self) -> int:
        return self.components.ndim


def _same_point(objs) -> None:
    p0 = objs[0].basepoint
    for o in objs[1:]:
        if o.basepoint.shape != p0.shape or not np.array_equal(o.basepoint, p0):
            raise BasepointMismatch(f"{o.basepoint} != {p0}")


def h_pair(V: Tractor, W: Tractor) -> float:
    _same_point([V, W])
    return float(V.vector() @ tractor_metric_matrix(V.metric) @ W.vector())


def slot_tractor(slot: str, n: int, basepoint=None, metric=None, index: int = 0) -> Tractor:
    """Y, X, or Z_index as a Tractor object."""
    basepoint = np.zeros(n) if basepoint is None else np.asarray(basepoint, dtype=float)
    metric = np.eye(n) if metric is None else metric
    Y, X, Z = basis_vectors(n)
    v = {"Y": Y, "X": X, "Z": Z[index] if slot == "Z" else None}[slot]
    return Tractor.from_vector(v, basepoint, metric)


# ---------------------------------------------------------------- alternating algebra


def _perm_sign(p) -> int:
    sign, seen = 1, list(p)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


_PERMS = {k: [(p, _perm_sign(p)) for p in itertools.permutations(range(k))] for k in range(1, MAX_RANK + 1)}


def alternate(T: np.ndarray) -> np.ndarray:
    """Normalized antisymmetrization over all indices."""
    k = T.ndim
    if k <= 1:
        return np.array(T, dtype=float)
    out = np.zeros_like(T, dtype=float)
    for p, s in _PERMS[k]:
        out += s * np.transpose(T, p)
    return out / math.factorial(k)


def wedge_arrays(*parts: np.ndarray) -> np.ndarray:
    T = parts[0]
    for P in parts[1:]:
        T = np.multiply.outer(T, P)
    if T.ndim > MAX_RANK:
        raise RankOverflow(f"total rank {T.ndim} exceeds {MAX_RANK}")
    return alternate(T)


def alt3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """a^[A b^B c^C] without building the generic permutation loop."""
    ab = np.multiply.outer(a, b) - np.multiply.outer(b, a)
    T = np.multiply.outer(ab, c)
    return (T + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)) / 6.0


def wedge(factors: Sequence[Tractor | TractorWedge]) -> TractorWedge:
    factors = list(factors)
    if not factors:
        raise ValueError("wedge needs at least one factor")
    if sum(f.rank for f in factors) > MAX_RANK:
        raise RankOverflow(f"total rank exceeds {MAX_RANK}")
    _same_point(factors)
    arrays = [f.vector() if isinstance(f, Tractor) else f.components for f in factors]
    return TractorWedge(wedge_arrays(*arrays), factors[0].basepoint, factors[0].metric)


def contract_full(A: np.ndarray, B: np.ndarray, H: np.ndarray) -> float:
    """A^{A1..Ak} B^{B1..Bk} h_{A1B1} ... h_{AkBk}."""
    Bl = B
    for axis in range(B.ndim):
        Bl = np.moveaxis(np.tensordot(H, Bl, axes=([1], [axis])), 0, axis)
    return float(np.sum(A * Bl))


def pairing_arrays(A: np.ndarray, B: np.ndarray, H: np.ndarray) -> float:
    if A.ndim != B.ndim:
        raise RankMismatch(f"ranks {A.ndim} and {B.ndim}")
    return contract_full(A, B, H) / math.factorial(A.ndim)


def wedge_pairing(A: TractorWedge | Tractor, B: TractorWedge | Tractor) -> float:
    if A.rank != B.rank:
        raise RankMismatch(f"ranks {A.rank} and {B.rank}")
    _same_point([A, B])
    a = A.vector() if isinstance(A, Tractor) else A.components
    b = B.vector() if isinstance(B, Tractor) else B.components
    return pairing_arrays(a, b, tractor_metric_matrix(A.metric))


def wedge_residual_norm(A: TractorWedge | np.ndarray) -> float:
    comps = A.components if isinstance(A, TractorWedge) else np.asarray(A)
    return float(np.linalg.norm(comps.ravel()))


# ---------------------------------------------------------------- scale tractor and connection


def scale_tractor_vector(S: AlmostPRStructure, x, pack: CurvaturePack | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    pack = curvature_at(S.background, x) if pack is None else pack
    s = S.scale(x)
    ds = S.scale.grad(x)
    rho = -(laplacian(S, x) + pack.J * s) / S.dim
    return np.concatenate([[s], pack.metric_inv @ ds, [rho]])


def scale_tractor(S: AlmostPRStructure, x) -> Tractor:
    """I = (s, nabla_a s, -(Laplacian s + J s)/n) in the background trivialization."""
    x = np.asarray(x, dtype=float)
    pack = curvature_at(S.background, x)
    return Tractor.from_vector(scale_tractor_vector(S, x, pack), x, pack.metric)


def connection_matrix(pack: CurvaturePack, u) -> np.ndarray:
    """C(u) with u^a nabla_a V = dV/dt + C(u) V on contravariant components."""
    u = np.asarray(u, dtype=float)
    n = u.size
    g = pack.metric
    Pu_low = pack.schouten @ u
    C = np.zeros((n + 2, n + 2))
    C[0, 1:-1] = -(g @ u)
    C[1:-1, 0] = pack.metric_inv @ Pu_low
    C[1:-1, 1:-1] = np.einsum("bac,a->bc", pack.christoffel, u)
    C[1:-1, -1] = u
    C[-1, 1:-1] = -Pu_low
    return C


def apply_connection(C: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Act with C on every index of the tensor T."""
    out = np.zeros_like(T, dtype=float)
    for axis in range(T.ndim):
        out += np.moveaxis(np.tensordot(C, T, axes=([1], [axis])), 0, axis)
    return out


def tractor_derivative_along(S: AlmostPRStructure, state, V: Tractor, Vdot) -> Tractor:
    """u^a nabla_a V for a tractor field along a curve.

    ``Vdot`` holds the parameter derivatives of the slots ``(sigma, mu_b, rho)``
    (a Tractor or a 3-tuple), with mu index down.
    """
    x = np.asarray(state.x, dtype=float)
    u = np.asarray(state.u, dtype=float)
    if not np.array_equal(np.asarray(V.basepoint), x):
        raise BasepointMismatch(f"tractor at {V.basepoint}, state at {x}")
    if isinstance(Vdot, Tractor):
        sd, mud, rd = Vdot.sigma, np.asarray(Vdot.mu, dtype=float), Vdot.rho
    else:
        sd, mud, rd = Vdot
        mud = np.asarray(mud, dtype=float)
    pack = curvature_at(S.background, x)
    mu = np.asarray(V.mu, dtype=float)
    Pu = pack.schouten @ u
    d_sigma = sd - u @ mu
    d_mu = (
        mud
        - np.einsum("cab,a,c->b", pack.christoffel, u, mu)
        + (pack.metric @ u) * V.rho
        + Pu * V.sigma
    )
    d_rho = rd - Pu @ pack.metric_inv @ mu
    return Tractor(float(d_sigma), d_mu, float(d_rho), x, pack.metric)


def scale_tractor_rate(S: AlmostPRStructure, x, u, h: float | None = None) -> tuple[float, np.ndarray, float]:
    """Parameter derivatives of the slots of I along velocity u.

    sigma and mu slots use the scale's gradient and Hessian; the rho slot uses a
    fourth-order five-point stencil along u.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    sd = float(S.scale.grad(x) @ u)
    mud = S.scale.hess(x) @ u
    h = FD_STEP_SECOND * (1.0 + np.linalg.norm(x)) / max(np.linalg.norm(u), 1e-300) if h is None else h

    def rho(t):
        return scale_tractor_vector(S, x + t * u)[-1]

    try:
        rd = (-rho(2 * h) + 8 * rho(h) - 8 * rho(-h) + rho(-2 * h)) / (12 * h)
    except OutOfChart:
        # near the chart edge: one-sided fourth-order stencil pointing inward
        for step in (h, -h):
            try:
                f = [rho(j * step) for j in range(5)]
            except OutOfChart:
                continue
            rd = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * step)
            break
        else:
            raise
    return sd, mud, float(rd)


def scale_tractor_parallel_residual(S: AlmostPRStructure, state) -> float:
    """Component norm of u^a nabla_a I at a curve state."""
    I = scale_tractor(S, state.x)
    dI = tractor_derivative_along(S, state, I, scale_tractor_rate(S, state.x, state.u))
    return float(np.linalg.norm(dI.vector()))


def transport_matrices(S: AlmostPRStructure, trace, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Fundamental matrices Phi(t_i) of tractor parallel transport along a trace.

    ``trace`` must provide ``params`` and ``dense(t) -> (x, u)``. A vector V0 at
    the first sample is carried to ``Phi[i] @ V0``.
    """
    n = S.dim
    ts = np.asarray(trace.params, dtype=float)

    def rhs(t, y):
        x, u = trace.dense(t)
        C = connection_matrix(curvature_at(S.background, x), u)
        return -(C @ y.reshape(n + 2, n + 2)).ravel()

    span = ts[-1] - ts[0]
    cfg = IntegratorConfig(
        method="rk45_adaptive",
        step=max(span / 100, 1e-6),
        max_step=max(span, 1e-6),
        rtol=rtol,
        atol=atol,
        t_max=max(span, 1e-300),
        stop_on_domain_exit=False,
    )
    sol = solve(rhs, ts[0], np.eye(n + 2).ravel(), cfg, t_end=ts[-1], landing=ts[1:-1])
    idx = np.searchsorted(sol.ts, ts)
    idx = np.clip(idx, 0, len(sol.ts) - 1)
    if not np.allclose(sol.ts[idx], ts, rtol=0, atol=1e-12 * max(1.0, abs(span))):
        raise IntegratorFailure("transport integrator missed a sample time")
    return sol.ys[idx].reshape(len(ts), n + 2, n + 2)


def parallel_transport(S: AlmostPRStructure, trace, V0: Tractor) -> list[Tractor]:
    Phi = transport_matrices(S, trace)
    v0 = V0.vector()
    out = []
    for state, P in zip(trace.states, Phi):
        g, _ = metric_at(S.background, state.x)
        out.append(Tractor.from_vector(P @ v0, state.x, g))
    return out


def transport_wedge(S: AlmostPRStructure, trace, T0: TractorWedge) -> list[TractorWedge]:
    Phi = transport_matrices(S, trace)
    out = []
    for state, P in zip(trace.states, Phi):
        g, _ = metric_at(S.background, state.x)
        out.append(TractorWedge(apply_linear(P, T0.components), np.asarray(state.x, dtype=float), g))
    return out


def apply_linear(P: np.ndarray, T: np.ndarray) -> np.ndarray:
    """P acting on every index of T (tensor power of a linear map)."""
    out = np.asarray(T, dtype=float)
    for axis in range(out.ndim):
        out = np.moveaxis(np.tensordot(P, out, axes=([1], [axis])), 0, axis)
    return out
