import numpy as np
import pytest

from tractorcurves.conformal import AlmostPRStructure, Scale, rebase_background, weighted_kinematics
from tractorcurves.curves import CurveState, CurveTrace, build_sigma, integrate_conformal_circle, trace_generalized_geodesic
from tractorcurves.errors import OnZeroLocus
from tractorcurves.geometry import flat_metric
from tractorcurves.integrals import (
    FirstIntegralReport,
    TwoFormField,
    conservation_report,
    constant_two_form,
    cky_residual,
    divergence,
    einstein_scale_integral,
    first_integral_value,
    pairing_integral,
    position_wedge,
    squared_coordinate_form,
)
from tractorcurves.integrators import IntegratorConfig
from tractorcurves.models import make_model
from tractorcurves.tractor import TractorWedge, basis_vectors, wedge_arrays

TIGHT = IntegratorConfig(rtol=1e-10, atol=1e-12, max_step=0.01, t_max=10.0)
E2 = np.array([0.0, 1.0, 0.0])
ETA = np.diag([-1.0, 1.0, 1.0])


def minkowski_structure():
    scale = Scale(lambda x: 0.5 * (1 - x @ ETA @ x), lambda x: -ETA @ x, lambda x: -ETA, name="lorentz")
    return AlmostPRStructure(flat_metric(3, signature=(2, 1)), scale, name="lorentz")


def eta_position_wedge(w):
    w = np.asarray(w, dtype=float)
    dk = np.einsum("cb,e->cbe", ETA, w) - np.einsum("ce,b->cbe", ETA, w)
    return TwoFormField(lambda x: np.outer(ETA @ x, w) - np.outer(w, ETA @ x), lambda x: dk, name="eta x^w")


def line(x0, e, length=2.0, samples=21):
    t = np.linspace(0, length, samples)
    return CurveTrace(t, x0 + np.outer(t, e), np.tile(e, (samples, 1)), np.zeros((samples, 3)))


def test_cky_residual_families(rng, euclidean):
    S = euclidean.structure
    x = rng.normal(size=3)
    assert cky_residual(S, constant_two_form(rng.normal(size=(3, 3))), x) <= 1e-12
    assert cky_residual(S, position_wedge(rng.normal(size=3)), x) <= 1e-12
    assert cky_residual(S, squared_coordinate_form(3), [0.5, 0.1, 0.2]) > 0.1


def test_cky_residual_fd_path(rng, euclidean):
    k = position_wedge([0.3, -1.0, 2.0])
    fd = TwoFormField(k.k)
    assert cky_residual(euclidean.structure, fd, rng.normal(size=3)) <= 1e-5


def test_cky_conformal_weight(hyperbolic):
    # x^w is CKY for the flat representative; rescaled with weight 3 it is CKY for any representative
    R = rebase_background(hyperbolic.structure, Scale.exp_linear([0.1, 0.2, 0.0]))
    k = position_wedge(E2).rescaled(Scale.exp_linear([0.1, 0.2, 0.0]))
    assert cky_residual(R, k, [0.2, 0.3, 0.1]) <= 1e-12
    assert cky_residual(R, position_wedge(E2), [0.2, 0.3, 0.1]) > 1e-3


def test_divergence_examples(euclidean):
    S = euclidean.structure
    assert not np.any(divergence(S, constant_two_form(np.ones((3, 3))), [1, 2, 3]))
    w = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(divergence(S, position_wedge(w), [0.3, 0.1, 0.2]), 2 * w, atol=1e-14)


def test_first_integral_on_lines(euclidean):
    S = euclidean.structure
    k = position_wedge(E2)
    across = [first_integral_value(S, k, st) for st in line(np.zeros(3), np.array([1.0, 0, 0])).states]
    assert np.max(np.abs(across)) == 0.0
    along = [first_integral_value(S, k, st) for st in line(np.array([0.3, 0, 0]), E2).states]
    np.testing.assert_allclose(np.abs(along), 1.0, atol=1e-14)


def test_first_integral_hyperbolic_diameter(hyperbolic):
    S = make_model("hyperbolic", 3, margin=2.0).structure
    trace = trace_generalized_geodesic(S, [-0.9, -0.2, 0.0], [1.0, 0.0, 0.0], TIGHT)
    assert trace.params[-1] == pytest.approx(10.0)
    report = conservation_report(S, position_wedge(E2), trace)
    assert report.relative_drift <= 1e-7
    assert abs(report.initial) > 0.1


def test_einstein_scale_integral(hyperbolic, euclidean):
    S = hyperbolic.structure
    k = position_wedge(E2)
    trace = trace_generalized_geodesic(S, [0.2, 0.1, 0.0], [0.3, 1.0, 0.2], TIGHT.with_(t_max=2.0), mode="interior")
    for st in trace.states[::50]:
        F = first_integral_value(S, k, st)
        # spacelike, n = 3: u.div k in the interior scale is -(n - 1) F
        assert einstein_scale_integral(S, k, st) == pytest.approx(-2.0 * F, abs=1e-10)
    w = np.array([0.0, 1.0, 0.5])
    u = np.array([0.0, 0.6, 0.8])
    assert einstein_scale_integral(euclidean.structure, position_wedge(w), CurveState([1, 0, 0], u)) == pytest.approx(2 * u @ w)
    with pytest.raises(OnZeroLocus):
        einstein_scale_integral(S, k, CurveState([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]))


def test_first_integral_rebase_invariance(rng, hyperbolic):
    S = hyperbolic.structure
    om = Scale.exp_linear([0.1, 0.0, 0.0])
    R = rebase_background(S, om)
    for k in (position_wedge([0.2, 1.0, -0.4]), constant_two_form([[0, 1, 2], [-1, 0, 0.5], [-2, -0.5, 0]])):
        for _ in range(5):
            st = CurveState(rng.uniform(-0.5, 0.5, 3), rng.normal(size=3), rng.normal(size=3))
            assert first_integral_value(R, k.rescaled(om), st) == pytest.approx(first_integral_value(S, k, st), abs=1e-12)


def test_lorentzian_timelike_smoke():
    S = minkowski_structure()
    k = eta_position_wedge([0.0, 1.0, 0.5])
    assert cky_residual(S, k, [0.1, 0.2, 0.3]) <= 1e-12
    trace = trace_generalized_geodesic(S, [0.1, 0.4, 0.0], [1.0, 0.2, 0.3], TIGHT.with_(t_max=3.0))
    assert trace.meta["causal"] == "timelike"
    report = conservation_report(S, k, trace)
    assert report.relative_drift <= 1e-9
    # the opposite sign on the divergence term is not conserved
    flipped = []
    for st in trace.states:
        wk = weighted_kinematics(S, st.x, st.u, st.a)
        flipped.append(wk.u @ k(st.x) @ wk.a + wk.sign / 2 * (wk.u @ divergence(S, k, st.x)))
    assert np.ptp(flipped) > 1e-3


def test_negative_control_drifts(hyperbolic):
    S = make_model("hyperbolic", 3, margin=2.0).structure
    trace = trace_generalized_geodesic(S, [0.5, 0, 0], [0, 1, 0.3], TIGHT)
    assert conservation_report(S, squared_coordinate_form(3), trace).relative_drift >= 1e-3
    assert conservation_report(S, position_wedge(E2), trace).relative_drift <= 1e-7


def test_report_fields():
    r = FirstIntegralReport.from_values([1.0, 1.5, 0.25], name="demo")
    assert r.initial == 1.0 and r.max_abs_drift == 0.75 and r.relative_drift == 0.5
    assert set(r.summary()) == {"integral_name", "initial", "max_abs_drift", "relative_drift", "samples"}
    assert FirstIntegralReport.from_values([0.0, 0.0]).relative_drift == 0.0


def test_pairing_integral_sigma_itself():
    S = make_model("euclidean", 3).structure
    r = 0.5
    trace = integrate_conformal_circle(S, CurveState([r, 0, 0], [0, 1, 0], [-1 / r, 0, 0]), TIGHT.with_(t_max=2.0))
    T0 = build_sigma(S, trace.state(0))
    rep = pairing_integral(S, trace, T0)
    np.testing.assert_allclose(rep.values, -1.0, atol=1e-8)
    assert rep.warning is None
    Y, X, Z = basis_vectors(3)
    for i in range(3):
        T1 = TractorWedge(wedge_arrays(X, Y, Z[i]), trace.X[0], np.eye(3))
        assert pairing_integral(S, trace, T1).max_abs_drift <= 1e-6
    # Sigma(0) lies along u = e2, so the Z_2 pairing is a nonzero constant
    assert abs(pairing_integral(S, trace, TractorWedge(wedge_arrays(X, Y, Z[1]), trace.X[0], np.eye(3))).initial) > 0.1


def test_pairing_integral_warns_off_circle(euclidean):
    S = euclidean.structure
    t = np.linspace(0.25, 1.25, 51)
    parab = CurveTrace(t, np.stack([t, t**2, 0 * t], 1), np.stack([1 + 0 * t, 2 * t, 0 * t], 1), np.stack([0 * t, 2 + 0 * t, 0 * t], 1))
    rep = pairing_integral(S, parab, build_sigma(S, parab.state(0)))
    assert rep.warning is not None and "conformal circle" in rep.warning
