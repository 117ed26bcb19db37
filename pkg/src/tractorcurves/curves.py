"""Integration of geodesics and conformal circles, and the tractor tests applied to them.

A ``CurveState`` stores the chart position ``x``, the coordinate velocity ``u``
and the coordinate acceleration ``a`` (second derivative of the chart
coordinates). Weighted velocity and acceleration are always derived from
these in the background scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import BPoly
from scipy.linalg import null_space

from .conformal import (
    AlmostPRStructure,
    ZERO_LOCUS_THRESHOLD,
    ae_residual,
    weighted_kinematics,
)
from .errors import (
    InfeasibleAtBoundary,
    InsufficientSamples,
    NoBoundaryHit,
    NotAlmostEinstein,
    NullVelocity,
    OnZeroLocus,
)
from .geometry import MetricField, christoffel_at, curvature_at, metric_at
from .integrators import IntegratorConfig, solve
from .tractor import (
    TractorWedge,
    alt3,
    apply_connection,
    basis_vectors,
    connection_matrix,
    scale_tractor_vector,
    wedge_arrays,
)

INFEASIBLE_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class CurveState:
    x: np.ndarray
    u: np.ndarray
    a: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if self.a is not None:
            object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        if not np.any(self.u):
            raise ValueError("curve velocity must be nonzero")

    @property
    def acc(self) -> np.ndarray:
        return np.zeros_like(self.u) if self.a is None else self.a


@dataclass(eq=False)
class CurveTrace:
    params: np.ndarray
    X: np.ndarray
    U: np.ndarray
    A: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if np.any(np.diff(self.params) <= 0):
            raise ValueError("trace parameters must be strictly increasing")

    def __len__(self) -> int:
        return len(self.params)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def states(self) -> list[CurveState]:
        return [CurveState(x, u, a) for x, u, a in zip(self.X, self.U, self.A)]

    def state(self, i: int) -> CurveState:
        return CurveState(self.X[i], self.U[i], self.A[i])

    @cached_property
    def interpolant(self) -> BPoly:
        data = np.stack([self.X, self.U, self.A], axis=1)
        return BPoly.from_derivatives(self.params, data)

    def dense(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity at parameter ``t`` from the quintic Hermite interpolant."""
        p = self.interpolant
        return p(t), p.derivative(1)(t)

    def dense_state(self, t: float) -> CurveState:
        p = self.interpolant
        return CurveState(p(t), p.derivative(1)(t), p.derivative(2)(t))

    def truncated(self, mask) -> "CurveTrace":
        mask = np.asarray(mask, dtype=bool)
        diags = {k: np.asarray(v)[mask] for k, v in self.diagnostics.items()}
        return CurveTrace(self.params[mask], self.X[mask], self.U[mask], self.A[mask], diags, dict(self.meta))


# ---------------------------------------------------------------- flows


def _geodesic_acc(M: MetricField, x, u) -> np.ndarray:
    return -np.einsum("abc,b,c->a", christoffel_at(M, x), u, u)


def integrate_geodesic(
    metric: MetricField,
    s0: CurveState,
    cfg: IntegratorConfig = IntegratorConfig(),
    stop: Optional[Callable[[float, np.ndarray], bool]] = None,
) -> CurveTrace:
    """Affinely parametrised geodesic of ``metric`` from ``s0`` (acceleration ignored)."""
    n = metric.dim
    metric_at(metric, s0.x)

    def rhs(t, y):
        x, u = y[:n], y[n:]
        return np.concatenate([u, _geodesic_acc(metric, x, u)])

    def stop_y(t, y):
        return stop is not None and stop(t, y[:n])

    sol = solve(rhs, 0.0, np.concatenate([s0.x, s0.u]), cfg, stop=stop_y if stop else None)
    X, U = sol.ys[:, :n], sol.ys[:, n:]
    A = np.array([_geodesic_acc(metric, x, u) for x, u in zip(X, U)])
    return CurveTrace(sol.ts, X, U, A, meta={"kind": "geodesic", "status": sol.status, **sol.info})


def _circle_rhs(S: AlmostPRStructure, n: int):
    def rhs(t, y):
        x, u, A = y[:n], y[n : 2 * n], y[2 * n :]
        pack = curvature_at(S.background, x)
        g, gamma = pack.metric, pack.christoffel
        uu = u @ g @ u
        eps = 1.0 if uu > 0 else -1.0
        Pu = pack.schouten @ u
        dx = u
        du = A - np.einsum("abc,b,c->a", gamma, u, u)
        dA = (
            -np.einsum("abc,b,c->a", gamma, u, A)
            + eps * (pack.metric_inv @ Pu)
            - (Pu @ u + eps * (A @ g @ A)) * u
        )
        return np.concatenate([dx, du, dA])

    return rhs


def _renormalizer(S: AlmostPRStructure, n: int):
    def post(y):
        x, u, A = y[:n], y[n : 2 * n], y[2 * n :]
        g, _ = metric_at(S.background, x)
        uu = u @ g @ u
        A = A - (u @ g @ A) / uu * u
        u = u / np.sqrt(abs(uu))
        return np.concatenate([x, u, A])

    return post


def integrate_conformal_circle(
    S: AlmostPRStructure,
    s0: CurveState,
    cfg: IntegratorConfig = IntegratorConfig(),
    stop: Optional[Callable[[float, np.ndarray], bool]] = None,
) -> CurveTrace:
    """Conformal circle through ``s0`` in background arc-length.

    The state is normalised first (unit background speed, acceleration
    orthogonal to the velocity), so any parametrisation of the initial jet is
    accepted. The flow is

        u . nabla a = eps P(u)^# - (P(u, u) + eps g(a, a)) u,  eps = g(u, u) = +-1.
    """
    n = S.dim
    wk = weighted_kinematics(S, s0.x, s0.u, s0.acc)
    y0 = np.concatenate([s0.x, wk.u, wk.a])
    rhs = _circle_rhs(S, n)

    def stop_y(t, y):
        return stop is not None and stop(t, y[:n])

    sol = solve(rhs, 0.0, y0, cfg, stop=stop_y if stop else None, post_step=_renormalizer(S, n))
    X, U, Acov = sol.ys[:, :n], sol.ys[:, n : 2 * n], sol.ys[:, 2 * n :]
    A = np.array([a - np.einsum("abc,b,c->a", christoffel_at(S.background, x), u, u) for x, u, a in zip(X, U, Acov)])
    return CurveTrace(
        sol.ts, X, U, A, meta={"kind": "conformal_circle", "status": sol.status, "causal": wk.causal_type, **sol.info}
    )


# ---------------------------------------------------------------- Sigma


def sigma_array(S: AlmostPRStructure, state: CurveState) -> np.ndarray:
    """Sigma = 6 eps X^Y^Z(u) + 6 X^Z(u)^Z(a) with eps = u.u = +-1 (1/k! wedges)."""
    n = S.dim
    wk = weighted_kinematics(S, state.x, state.u, state.acc)
    Y, X, _ = basis_vectors(n)
    W = np.concatenate([[0.0], wk.u, [0.0]])
    Az = np.concatenate([[0.0], wk.a, [0.0]])
    return 6.0 * (wk.sign * alt3(X, Y, W) + alt3(X, W, Az))


def build_sigma(S: AlmostPRStructure, state: CurveState) -> TractorWedge:
    g, _ = metric_at(S.background, state.x)
    return TractorWedge(sigma_array(S, state), state.x, g)


def sigma_via_tractors(S: AlmostPRStructure, state: CurveState) -> np.ndarray:
    """6 sigma_u^-1 X^U^A with U = D_t(sigma_u^-1 X) and A = D_t U from the tractor connection.

    The X-slot of U is only known up to its time derivative, which drops out of
    X^U^A, so it is set to zero when differentiating.
    """
    n = S.dim
    x, u, a = state.x, state.u, state.acc
    pack = curvature_at(S.background, x)
    g = pack.metric
    wk = weighted_kinematics(S, x, u, a)
    su = wk.sigma_u
    su_dot = wk.sign * float(u @ g @ wk.a_cov) / su
    _, X, _ = basis_vectors(n)
    C = connection_matrix(pack, u)
    U = C @ X / su - su_dot / su**2 * X
    U_dot = np.concatenate([[0.0], a / su - u * su_dot / su**2, [0.0]])
    A = U_dot + C @ U
    return 6.0 / su * alt3(X, U, A)


def sigma_norm2(S: AlmostPRStructure, state: CurveState) -> float:
    from .tractor import pairing_arrays, tractor_metric_matrix

    g, _ = metric_at(S.background, state.x)
    Sig = sigma_array(S, state)
    return pairing_arrays(Sig, Sig, tractor_metric_matrix(g))


def fd_weights(z: float, xs: np.ndarray, m: int = 1) -> np.ndarray:
    """Fornberg weights for the m-th derivative at z from samples at xs."""
    xs = np.asarray(xs, dtype=float)
    N = len(xs)
    c = np.zeros((N, m + 1))
    c1, c4 = 1.0, xs[0] - z
    c[0, 0] = 1.0
    for i in range(1, N):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - z
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def sample_derivative(ts: np.ndarray, values: np.ndarray, width: int = 7) -> np.ndarray:
    """d/dt of sampled values (first axis) with a sliding polynomial stencil."""
    N = len(ts)
    if N < width:
        raise InsufficientSamples(f"need at least {width} samples, got {N}")
    out = np.empty_like(values, dtype=float)
    half = width // 2
    for i in range(N):
        lo = min(max(i - half, 0), N - width)
        w = fd_weights(ts[i], ts[lo : lo + width])
        out[i] = np.tensordot(w, values[lo : lo + width], axes=(0, 0))
    return out


def sigma_parallel_residual(S: AlmostPRStructure, trace: CurveTrace, width: int = 7) -> np.ndarray:
    """Per-sample component norm of u.nabla Sigma (weighted velocity), Sigma differentiated
    numerically along the samples."""
    if len(trace) < width:
        raise InsufficientSamples(f"need at least {width} samples, got {len(trace)}")
    states = trace.states
    sig = np.array([sigma_array(S, st) for st in states])
    dsig = sample_derivative(trace.params, sig, width)
    out = np.empty(len(trace))
    for i, st in enumerate(states):
        pack = curvature_at(S.background, st.x)
        D = dsig[i] + apply_connection(connection_matrix(pack, st.u), sig[i])
        su = np.sqrt(abs(st.u @ pack.metric @ st.u))
        out[i] = np.linalg.norm(D) / su
    return out


# ---------------------------------------------------------------- generalised geodesics


def wedge_I_sigma(S: AlmostPRStructure, state: CurveState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    I = scale_tractor_vector(S, state.x)
    Sig = sigma_array(S, state)
    return wedge_arrays(I, Sig), I, Sig


def geodesic_wedge_residual(S: AlmostPRStructure, state: CurveState) -> float:
    """|I ^ Sigma| / (|I| |Sigma|), component norms in the background."""
    IS, I, Sig = wedge_I_sigma(S, state)
    return float(np.linalg.norm(IS) / (np.linalg.norm(I) * np.linalg.norm(Sig)))


def closed_form_acceleration(S: AlmostPRStructure, x, u) -> np.ndarray:
    """-eps (grad s)_perp / s: the weighted acceleration of a geodesic of s^-2 g off the zero locus."""
    x = np.asarray(x, dtype=float)
    if S.on_zero_locus(x):
        raise OnZeroLocus(f"scale vanishes at {x}")
    g, ginv = metric_at(S.background, x)
    wk = weighted_kinematics(S, x, u)
    v = ginv @ S.scale.grad(x)
    uu = wk.u @ g @ wk.u
    v_perp = v - (v @ g @ wk.u) / uu * wk.u
    return -wk.sign * v_perp / S.scale(x)


def solve_initial_acceleration(S: AlmostPRStructure, x, u) -> np.ndarray:
    """Weighted acceleration a with g(a, u) = 0 minimising |I ^ Sigma(a)|.

    I ^ Sigma is affine in a, so this is a linear least-squares problem over the
    orthogonal complement of u. On the zero locus the solution is not unique and
    the minimum-norm one is returned.
    """
    n = S.dim
    x = np.asarray(x, dtype=float)
    g, _ = metric_at(S.background, x)
    wk = weighted_kinematics(S, x, u)
    I = scale_tractor_vector(S, x)
    Y, X, Z = basis_vectors(n)
    W = np.concatenate([[0.0], wk.u, [0.0]])
    r0 = wedge_arrays(I, 6.0 * wk.sign * alt3(X, Y, W)).ravel()
    cols = np.array([wedge_arrays(I, 6.0 * alt3(X, W, Z[j])).ravel() for j in range(n)]).T
    B = null_space((g @ wk.u)[None, :])
    M = cols @ B
    c, *_ = np.linalg.lstsq(M, -r0, rcond=None)
    a = B @ c
    res = np.linalg.norm(r0 + M @ c)
    sig = 6.0 * (wk.sign * alt3(X, Y, W) + alt3(X, W, np.concatenate([[0.0], a, [0.0]])))
    rel = res / (np.linalg.norm(I) * np.linalg.norm(sig))
    if rel > INFEASIBLE_THRESHOLD:
        raise InfeasibleAtBoundary(
            f"|I^Sigma| stays at {rel:.3e} for every acceleration at {x}: velocity not normal to the zero locus"
        )
    return a


def annotate(S: AlmostPRStructure, trace: CurveTrace, which=("s", "wedge_residual", "sigma_norm2")) -> CurveTrace:
    """Fill per-sample diagnostics in place and return the trace."""
    states = trace.states
    if "s" in which:
        trace.diagnostics["s"] = np.array([S.scale(st.x) for st in states])
    if "wedge_residual" in which:
        trace.diagnostics["wedge_residual"] = np.array([geodesic_wedge_residual(S, st) for st in states])
    if "sigma_norm2" in which:
        trace.diagnostics["sigma_norm2"] = np.array([sigma_norm2(S, st) for st in states])
    if "sigma_residual" in which:
        trace.diagnostics["sigma_residual"] = sigma_parallel_residual(S, trace)
    return trace


def check_almost_einstein(S: AlmostPRStructure, points, tol: float = 1e-6) -> float:
    worst = max(ae_residual(S, p) for p in np.atleast_2d(points))
    if worst > tol:
        raise NotAlmostEinstein(f"A.E. residual {worst:.3e} exceeds {tol:g}")
    return worst


def trace_generalized_geodesic(
    S: AlmostPRStructure,
    x0,
    u0,
    cfg: IntegratorConfig = IntegratorConfig(),
    mode: str = "einstein",
    ae_tol: float = 1e-6,
    zero_stop: float = 1e-8,
    probe_radius: float = 0.1,
) -> CurveTrace:
    """Generalised geodesic from ``(x0, u0)``.

    ``einstein``: conformal-circle flow from the solved initial acceleration,
    valid across the zero locus; the structure must satisfy the A.E. equation at
    ``x0`` and nearby probe points. ``interior``: geodesic of s^-2 g, stopped
    when |s| drops below ``zero_stop``.
    """
    n = S.dim
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if mode == "einstein":
        probes = [x0] + [x0 + probe_radius * e for e in np.eye(n)] + [x0 - probe_radius * e for e in np.eye(n)]
        probes = [p for p in probes if S.background.contains(p)]
        check_almost_einstein(S, probes, ae_tol)
        wk = weighted_kinematics(S, x0, u0)
        a_w = solve_initial_acceleration(S, x0, u0)
        acc = a_w - np.einsum("abc,b,c->a", christoffel_at(S.background, x0), wk.u, wk.u)
        trace = integrate_conformal_circle(S, CurveState(x0, wk.u, acc), cfg)
    elif mode == "interior":
        if S.on_zero_locus(x0):
            raise OnZeroLocus(f"interior mode needs s(x0) != 0, got {S.scale(x0)}")
        sign0 = np.sign(S.scale(x0))

        def stop(t, x):
            return sign0 * S.scale(x) < zero_stop

        trace = integrate_geodesic(S.singular_metric, CurveState(x0, u0), cfg, stop=stop)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    trace.meta["mode"] = mode
    return annotate(S, trace, ("s", "wedge_residual"))


# ---------------------------------------------------------------- boundary and alignment


def _angle_to_normal(S: AlmostPRStructure, x, v) -> float:
    """Angle in degrees between v and grad s, measured with |g| on both components."""
    g, ginv = metric_at(S.background, x)
    nrm = ginv @ S.scale.grad(x)
    nn = nrm @ g @ nrm
    par = (v @ g @ nrm) / nn * nrm
    perp = v - par
    return float(np.degrees(np.arctan2(np.sqrt(abs(perp @ g @ perp)), np.sqrt(abs(par @ g @ par)))))


@dataclass(frozen=True)
class BoundaryHit:
    param: float
    point: np.ndarray
    angle_deg: float  # between velocity and the conormal grad s

    @property
    def incidence_deg(self) -> float:
        """Angle between the curve and the zero-locus hypersurface."""
        return 90.0 - self.angle_deg


def boundary_incidence(S: AlmostPRStructure, trace: CurveTrace, s_tol: float = 1e-12) -> BoundaryHit:
    """First crossing of s = 0 along the trace, by bisection on s(x(t)), with the
    incidence angle Richardson-extrapolated from central-difference velocities."""
    s_vals = np.array([S.scale(x) for x in trace.X])
    p = trace.interpolant
    ts = trace.params
    hit = None
    for i in range(len(ts) - 1):
        if s_vals[i] == 0.0 and i > 0:
            hit = ts[i]
            break
        if np.sign(s_vals[i]) * np.sign(s_vals[i + 1]) < 0:
            lo, hi = ts[i], ts[i + 1]
            s_lo = s_vals[i]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                s_mid = S.scale(p(mid))
                if abs(s_mid) <= s_tol or hi - lo < 1e-15 * max(1.0, abs(mid)):
                    break
                if np.sign(s_mid) == np.sign(s_lo):
                    lo, s_lo = mid, s_mid
                else:
                    hi = mid
            hit = mid
            break
    if hit is None:
        if abs(s_vals[-1]) < ZERO_LOCUS_THRESHOLD * 1e2 and len(ts) > 1:
            hit = ts[-1]
        else:
            raise NoBoundaryHit("scale does not change sign or vanish along the trace")
    x_star = p(hit)
    spacing = np.min(np.diff(ts))
    h = 0.25 * spacing
    lo_t, hi_t = ts[0], ts[-1]

    def angle(hh):
        t1, t0 = min(hit + hh, hi_t), max(hit - hh, lo_t)
        v = (p(t1) - p(t0)) / (t1 - t0)
        return _angle_to_normal(S, x_star, v)

    a_h, a_h2 = angle(h), angle(h / 2)
    extrapolated = (4.0 * a_h2 - a_h) / 3.0
    return BoundaryHit(float(hit), x_star, float(abs(extrapolated)))


def schouten_alignment_residual(S: AlmostPRStructure | MetricField, state: CurveState) -> float:
    """|(u^a P_a^b)_perp| / (|P| |u|), Schouten of the (singular) metric."""
    M = S.singular_metric if isinstance(S, AlmostPRStructure) else S
    pack = curvature_at(M, state.x)
    g = pack.metric
    u = np.asarray(state.u, dtype=float)
    uu = u @ g @ u
    if abs(uu) < 1e-14 * max(1.0, float(np.max(np.abs(g)))) * (u @ u):
        raise NullVelocity(f"g(u, u) = {uu:.3e}")
    Pmix = pack.schouten_mixed()
    normP = np.linalg.norm(Pmix)
    if normP == 0.0:
        return 0.0
    v = Pmix @ u
    v_perp = v - (v @ g @ u) / uu * u
    return float(np.linalg.norm(v_perp) / (normP * np.linalg.norm(u)))


def background_arc_length(trace: CurveTrace, metric: MetricField, order: int = 6) -> np.ndarray:
    """Cumulative arc length of the trace in ``metric`` at each sample (Gauss-Legendre per interval)."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    dp = trace.interpolant.derivative(1)
    p = trace.interpolant
    out = np.zeros(len(trace))
    for i in range(len(trace) - 1):
        a, b = trace.params[i], trace.params[i + 1]
        ts = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        speed = [np.sqrt(abs(v @ metric_at(metric, p(t))[0] @ v)) for t, v in zip(ts, dp(ts))]
        out[i + 1] = out[i] + 0.5 * (b - a) * float(np.dot(weights, speed))
    return out
