import numpy as np
import pytest

from tractorcurves.conformal import ae_residual
from tractorcurves.errors import DimensionTooLow, OnZeroLocus, UnknownModel
from tractorcurves.geometry import curvature_at
from tractorcurves.models import MODEL_NAMES, analytic_reference, make_model, random_interior_points
from tractorcurves.tractor import h_pair, scale_tractor


def test_registry_names():
    assert set(MODEL_NAMES) == {"euclidean", "sphere", "hyperbolic", "anisotropic"}
    with pytest.raises(UnknownModel):
        make_model("torus", 3)


def test_dimension_guard():
    with pytest.raises(DimensionTooLow):
        make_model("sphere", 2)
    demo = make_model("sphere", 2, allow_low_dim=True)
    assert demo.dim == 2
    with pytest.raises(DimensionTooLow):
        curvature_at(demo.structure.singular_metric, [0.1, 0.2])


@pytest.mark.parametrize("name, hII", [("hyperbolic", 1.0), ("sphere", -1.0), ("euclidean", 0.0)])
def test_model_constants(name, hII, rng):
    model = make_model(name, 3)
    assert model.hII == hII
    for x in random_interior_points(model, 5, rng):
        I = scale_tractor(model.structure, x)
        assert h_pair(I, I) == pytest.approx(hII, abs=1e-12)
        assert ae_residual(model.structure, x) < 1e-12


def test_hyperbolic_chart_margin():
    assert make_model("hyperbolic", 3).background.contains([1.04, 0.0, 0.0])
    assert not make_model("hyperbolic", 3).background.contains([1.06, 0.0, 0.0])
    assert make_model("hyperbolic", 3, margin=0.5).background.contains([1.4, 0.0, 0.0])


@pytest.mark.parametrize("name", ["sphere", "hyperbolic", "anisotropic"])
@pytest.mark.parametrize("dim", [3, 4])
def test_reference_matches_pipeline(name, dim, rng):
    model = make_model(name, dim)
    M = model.structure.singular_metric
    for x in random_interior_points(model, 5, rng):
        ref = analytic_reference(model, x)
        pack = curvature_at(M, x)
        scale = np.max(np.abs(pack.metric))
        np.testing.assert_allclose(pack.christoffel, ref.christoffel, atol=1e-10 * max(1.0, np.max(np.abs(ref.christoffel))))
        np.testing.assert_allclose(pack.schouten, ref.schouten, atol=1e-10 * scale)
        assert pack.J == pytest.approx(ref.J, abs=1e-10)


def test_reference_constants():
    for name, lam in (("sphere", 0.5), ("hyperbolic", -0.5)):
        model = make_model(name, 3)
        ref = analytic_reference(model, [0.2, 0.1, -0.3])
        np.testing.assert_allclose(ref.schouten, lam * ref.metric, atol=1e-13 * np.max(ref.metric))
        assert ref.J == pytest.approx(3 * lam)
    ref = analytic_reference(make_model("euclidean", 3), [0.5, 0.5, 0.5])
    assert not np.any(ref.christoffel) and not np.any(ref.schouten)
    with pytest.raises(OnZeroLocus):
        analytic_reference(make_model("hyperbolic", 3), [0.6, 0.8, 0.0])


def test_anisotropic_is_not_einstein(anisotropic, rng):
    assert not anisotropic.einstein
    res = [ae_residual(anisotropic.structure, x) for x in random_interior_points(anisotropic, 20, rng)]
    assert np.mean(np.array(res) > 1e-3) >= 0.9
