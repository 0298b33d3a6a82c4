import math

import numpy as np
import pytest

from splab.cartesian import Box3D, RadialProfile, embed_radial, minimize_3d, symmetry_defect
from splab.minimize import MinimizeOptions
from splab.nonlinearity import Nonlinearity, ScalingContext
from splab.radial import mass
from splab.recenter import RecenterError, orthogonality_residuals, recenter
from splab.runner import smooth_perturbation


@pytest.fixture(scope="module")
def setup(phi3):
    box = Box3D(8.0 / math.sqrt(phi3.omega0), 64)
    prof = RadialProfile(phi3.phi)
    return box, prof


def test_exact_translate_recovered(setup, phi3):
    box, prof = setup
    tau0 = np.array([0.6, -0.35, 0.2]) * box.h
    u = embed_radial(phi3.phi, box, center=-tau0, profile=prof)
    tau, R = recenter(u, prof)
    np.testing.assert_allclose(tau, tau0, atol=1e-10 * box.L)
    assert math.sqrt(mass(R)) <= 1e-8


def test_even_perturbation_keeps_origin(setup, phi3):
    box, prof = setup
    U = embed_radial(phi3.phi, box, profile=prof)
    X, Y, Z = box.coordinates()
    d = 0.02 * (X * X - Y * Y) * phi3.omega0 * U.values
    rc = recenter(U + d, prof)
    # the periodic node set is not mirror symmetric, which leaves a tiny offset
    np.testing.assert_allclose(rc.tau, 0.0, atol=1e-8 * box.L)
    assert math.isclose(math.sqrt(mass(rc.remainder)), math.sqrt(np.sum(d * d) * box.weights),
                        rel_tol=1e-6)


def test_orthogonality_on_random_basin_inputs(setup, phi3):
    box, prof = setup
    rng = np.random.default_rng(11)
    for _ in range(4):
        tau0 = rng.uniform(-2, 2, 3) * box.h
        U = embed_radial(phi3.phi, box, center=-tau0, profile=prof)
        u = U + smooth_perturbation(box, U.values, rng, 0.05, 1 / math.sqrt(phi3.omega0))
        rc = recenter(u, prof)
        scale = math.sqrt(mass(u)) * math.sqrt(phi3.omega0)
        assert np.max(np.abs(rc.orthogonality)) <= 1e-10 * scale
        np.testing.assert_allclose(orthogonality_residuals(u, phi3.phi, rc.tau),
                                   rc.orthogonality, atol=1e-12 * scale)


def test_radial_input(phi3):
    rc = recenter(phi3.phi * 1.01, phi3.phi)
    assert np.all(rc.tau == 0)
    assert rc.steps == 0
    with pytest.raises(ValueError):
        recenter(phi3.phi, "not a field")


def test_step_cap_raises(setup, phi3, monkeypatch):
    import splab.recenter as rec
    box, prof = setup
    rng = np.random.default_rng(5)
    U = embed_radial(phi3.phi, box, center=(2 * box.h, 0, 0), profile=prof)
    u = U + smooth_perturbation(box, U.values, rng, 0.2, 1 / math.sqrt(phi3.omega0))
    monkeypatch.setattr(rec, "MAX_STEPS", 1)
    with pytest.raises(RecenterError):
        recenter(u, prof)


def test_minimizer_from_translated_state(setup, phi3):
    box, prof = setup
    tau0 = np.array([1.5, -1.0, 0.5]) * box.h
    u0 = embed_radial(phi3.phi, box, center=-tau0, profile=prof)
    u0 = u0 * (1 / math.sqrt(mass(u0)))
    f, rep = minimize_3d(Nonlinearity.pure_power(3.0), ScalingContext(1e-2, 3.0), u0,
                         MinimizeOptions(tol=1e-6, max_iter=2000))
    assert rep.converged
    # re-dilations about the origin move the center, so only the
    # decomposition itself is checked, not tau == tau0
    rc = recenter(f, prof)
    assert np.max(np.abs(rc.tau)) > 0.1 * box.h
    assert math.sqrt(mass(rc.remainder)) <= 1e-3
    assert symmetry_defect(f, -rc.tau) <= 1e-3
