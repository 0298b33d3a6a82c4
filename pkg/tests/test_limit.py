import math

import numpy as np
import pytest

from conftest import limit_state
from splab.functionals import energy_limit, euler_lagrange_residual, pohozaev_limit
from splab.limit import (
    mass_exponent, normalize_mass, omega_from_quotient, shoot_central_value,
    shoot_ground_state, shot_profile,
)
from splab.nonlinearity import Nonlinearity, ScalingContext
from splab.radial import RadialGrid, grad_norm_sq, lp_norm, mass


def test_cubic_central_value():
    # the 3D cubic ground state has Q(0) = 4.3373877...
    assert math.isclose(shoot_central_value(3.0), 4.33738, rel_tol=1e-5)


def test_shot_profile_is_positive_decreasing_with_yukawa_tail():
    r = np.linspace(0, 20, 2001)
    w = shot_profile(3.0, r)
    assert np.all(w > 0)
    assert np.all(np.diff(w) < 0)
    sel = (r > 8) & (r < 16)
    slope = np.polyfit(r[sel], np.log(r[sel] * w[sel]), 1)[0]
    assert math.isclose(slope, -1.0, rel_tol=1e-2)


@pytest.mark.parametrize("omega", [0.5, 4.0])
def test_scaling_law(omega):
    g = RadialGrid(24.0, 1024)
    p = 3.0
    w = shoot_ground_state(p, omega, g)
    ref = omega ** (1 / (p - 1)) * shoot_ground_state(p, 1.0, g.scaled(math.sqrt(omega))).values
    np.testing.assert_allclose(w.values, ref, rtol=1e-6, atol=1e-10 * np.max(ref))


@pytest.mark.parametrize("p", [2.8, 3.0, 3.5])
def test_nehari_identity(p):
    g = RadialGrid(30.0, 2048)
    w = shoot_ground_state(p, 1.0, g)
    lhs = grad_norm_sq(w) + mass(w)
    rhs = lp_norm(w, p + 1) ** (p + 1)
    assert math.isclose(lhs, rhs, rel_tol=1e-6)


def test_mass_exponent():
    assert mass_exponent(3.0) == -0.5
    assert abs(mass_exponent(7 / 3)) < 1e-15


@pytest.mark.parametrize("p", [7 / 3, 5.0, 2.0])
def test_out_of_range_p_rejected(p):
    with pytest.raises(ValueError):
        normalize_mass(p)


def test_cubic_omega0_is_squared_mass():
    st = limit_state(3.0)
    phi1 = shoot_ground_state(3.0, 1.0, RadialGrid(24.0, 2048))
    assert math.isclose(st.omega0, mass(phi1) ** 2, rel_tol=1e-10)


@pytest.mark.parametrize("p", [2.8, 3.0, 3.5])
def test_limit_state_residuals(p):
    st = limit_state(p)
    assert st.el_residual <= 1e-8
    assert st.pohozaev_residual <= 1e-6
    assert st.nehari_residual <= 1e-6
    assert st.mass_residual <= 1e-10
    assert math.isclose(omega_from_quotient(st), st.omega0, rel_tol=1e-6)
    assert np.all(st.phi.values[:-1] > 0)
    assert st.energy > 0


def test_limit_energy_on_manifold_formula():
    # on the limit manifold K0 = (3p-7)/(6(p-1)) |grad phi|^2
    st = limit_state(3.0)
    A = grad_norm_sq(st.phi)
    assert math.isclose(st.energy, (3 * 3 - 7) / (6 * 2) * A, rel_tol=1e-6)


def test_fixed_grid_normalization_agrees():
    st = limit_state(3.0)
    fixed = normalize_mass(3.0, st.phi.grid)
    assert math.isclose(fixed.omega0, st.omega0, rel_tol=1e-9)
    assert fixed.mass_residual < 1e-12


def test_grid_refinement_order():
    ref = normalize_mass(3.0, n=4096).omega0
    errs = [abs(normalize_mass(3.0, n=n).omega0 - ref) for n in (256, 512)]
    assert math.log2(errs[0] / errs[1]) >= 2


def test_serialization():
    st = limit_state(3.0)
    d = st.to_dict()
    assert d["omega0"] == st.omega0 and d["n"] == 2048
    assert st.profile_text().startswith("# rmax=")
