import math

import numpy as np
import pytest

from conftest import gaussian, limit_state
from splab.branch import newton_branch
from splab.functionals import energy_rescaled, euler_lagrange_residual, pohozaev_rescaled
from splab.minimize import MinimizeOptions, minimize_rescaled, pulled_back_gradient
from splab.functionals import FieldTerms
from splab.nonlinearity import Nonlinearity, ScalingContext, f2_default
from splab.radial import dilate, h1_distance, inner, mass, normalize

CUBIC = Nonlinearity.pure_power(3.0)


@pytest.fixture(scope="module")
def runs(phi3):
    opts = MinimizeOptions(tol=1e-10)
    return {c: minimize_rescaled(CUBIC, ScalingContext(c, 3.0), phi3.phi, opts)
            for c in (1e-1, 1e-2, 1e-3)}


def test_converges_onto_manifold(runs):
    for rep in runs.values():
        assert rep.converged, rep.message
        assert abs(rep.q_residual) < 1e-8 * rep.energy.kinetic
        assert rep.el_residual < 1e-7
        assert abs(mass(rep.field) - 1.0) < 1e-12
        assert rep.sign_flips == 0
        assert rep.curvature < 0


def test_energy_positive_and_distance_decreasing(runs, phi3):
    d = [h1_distance(runs[c].field, phi3.phi) for c in (1e-1, 1e-2, 1e-3)]
    assert d[0] > d[1] > d[2]
    assert all(r.K > 0 for r in runs.values())


def test_matches_newton_branch(runs, phi3):
    rep = runs[1e-2]
    u = newton_branch(CUBIC, ScalingContext(1e-2, 3.0), rep.omega, rep.field,
                      omega0=phi3.omega0, tol=1e-11)
    assert h1_distance(u, rep.field) <= 1e-6


def test_wide_gaussian_start(phi3):
    g = phi3.phi.grid
    init = normalize(gaussian(g, 3 / math.sqrt(phi3.omega0)))
    rep = minimize_rescaled(f2_default(), ScalingContext(1e-2, 3.0), init,
                            MinimizeOptions(tol=1e-9))
    assert rep.converged
    ref = minimize_rescaled(f2_default(), ScalingContext(1e-2, 3.0), phi3.phi,
                            MinimizeOptions(tol=1e-9))
    assert h1_distance(rep.field, ref.field) < 1e-5
    assert math.isclose(rep.K, ref.K, rel_tol=1e-9)


def test_pulled_back_gradient_matches_finite_difference(phi3, rng):
    from conftest import smooth_field
    ctx = ScalingContext(1e-2, 3.0)
    u = phi3.phi
    t = 1.2
    gr = pulled_back_gradient(f2_default(), ctx, u, t, FieldTerms.of(u))
    h = smooth_field(u.grid, rng, scale=1 / math.sqrt(phi3.omega0))
    eps = 1e-6
    e = lambda v: energy_rescaled(f2_default(), ctx, dilate(v, t)).total
    fd = (e(u + h * eps) - e(u - h * eps)) / (2 * eps)
    assert math.isclose(inner(u.with_values(gr), h), fd, rel_tol=1e-5)


def test_precondition_errors(phi3):
    with pytest.raises(ValueError):
        minimize_rescaled(CUBIC, ScalingContext(2.0, 3.0), phi3.phi)
    with pytest.raises(ValueError):
        minimize_rescaled(CUBIC, ScalingContext(1e-2, 3.0), phi3.phi * 1.1)
    with pytest.raises(ValueError):
        minimize_rescaled(Nonlinearity.pure_power(3.5), ScalingContext(1e-2, 3.0), phi3.phi)


def test_iteration_cap_reports_nonconvergence(phi3):
    g = phi3.phi.grid
    init = normalize(gaussian(g, 2 / math.sqrt(phi3.omega0)))
    rep = minimize_rescaled(CUBIC, ScalingContext(1e-2, 3.0), init,
                            MinimizeOptions(tol=1e-12, max_iter=2))
    assert not rep.converged
    assert rep.iterations == 2
    assert rep.message
