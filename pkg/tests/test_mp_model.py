import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mpu.errors import DomainError
from mpu.mp_model import MPModel


def quad_stieltjes(model, z):
    """Oracle: m_c by direct quadrature of the density (+ atom at 0 for d > 1)."""
    lm, lp = model.lambda_minus, model.lambda_plus
    f_re = lambda x: (model.density(x) / (x - z)).real  # noqa: E731
    f_im = lambda x: (model.density(x) / (x - z)).imag  # noqa: E731
    kw = dict(limit=400, epsabs=1e-13, epsrel=1e-13)
    val = complex(integrate.quad(f_re, lm, lp, **kw)[0], integrate.quad(f_im, lm, lp, **kw)[0])
    if model.d > 1:
        val += (1 - 1 / model.d) / (0 - z)
    return val


def test_edges():
    m = MPModel(0.25)
    assert m.lambda_minus == pytest.approx(0.25)
    assert m.lambda_plus == pytest.approx(2.25)
    assert MPModel.from_dims(200, 200).lambda_plus == 4.0


def test_bad_ratio():
    with pytest.raises(DomainError):
        MPModel(0.0)


@pytest.mark.parametrize("d", [0.5, 2.0])
def test_density_mass(d):
    m = MPModel(d)
    mass = integrate.quad(m.density, m.lambda_minus, m.lambda_plus, limit=200)[0]
    assert mass == pytest.approx(m.continuous_mass, abs=1e-8)


def test_density_singular_at_zero_for_d1():
    assert MPModel(1.0).density(0.0) == math.inf
    assert MPModel(1.0).density(5.0) == 0.0


@pytest.mark.parametrize("d", [0.3, 0.5, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("z", [1 + 0.5j, 0.3 + 0.01j, 5 + 0.2j, -1 + 1j, 2 + 3j])
def test_stieltjes_matches_quadrature(d, z):
    m = MPModel(d)
    assert abs(m.stieltjes(z) - quad_stieltjes(m, z)) < 1e-9


def test_stieltjes_requires_upper_half_plane():
    with pytest.raises(DomainError):
        MPModel(1.0).stieltjes(1.0 + 0j)


@pytest.mark.parametrize("d", [0.5, 2.0])
def test_stieltjes_large_z(d):
    z = 1e6j
    assert MPModel(d).stieltjes(z) * (-z) == pytest.approx(1.0, rel=1e-5)


def test_tail_mass_limits():
    m = MPModel(2.0)
    assert m.tail_mass(m.lambda_plus + 1) == 0.0
    assert m.tail_mass(0.01) == pytest.approx(0.5)
    assert m.tail_mass_with_atom(0.0) == pytest.approx(1.0)
    assert m.tail_mass_with_atom(-1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("d", [0.5, 1.0, 2.0])
def test_classical_locations(d):
    m = MPModel(d)
    N = 100
    locs = m.classical_locations(N)
    assert locs.count == min(N, round(N / d))
    assert np.all(np.diff(locs.gamma) < 0)
    assert locs.gamma[0] < m.lambda_plus
    # last location sits at the lower edge of the continuous support
    assert locs.gamma[-1] == pytest.approx(m.lambda_minus, abs=1e-12)
    n = np.array([m.tail_mass(g) for g in locs.gamma[:-1]])
    np.testing.assert_allclose(n, np.arange(1, locs.count) / N, atol=1e-10)


def test_classical_location_count_guard():
    with pytest.raises(IndexError):
        MPModel(2.0).classical_locations(100, 51)


def test_classical_locations_csv(tmp_path):
    p = tmp_path / "g.csv"
    MPModel(1.0).classical_locations(5).to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "j,gamma_j" and len(lines) == 6


@settings(max_examples=40, deadline=None)
@given(d=st.floats(0.06, 15.0), E=st.floats(-2.0, 20.0), eta=st.floats(1e-3, 10.0))
def test_stieltjes_is_in_upper_half_plane_and_solves_quadratic(d, E, eta):
    m = MPModel(d)
    z = complex(E, eta)
    mc = m.stieltjes(z)
    assert mc.imag > 0
    assert (z * mc).imag >= -1e-12
    assert abs(d * z * mc * mc + (z - 1 + d) * mc + 1) < 1e-9 * max(1.0, abs(z * mc * mc))


@settings(max_examples=25, deadline=None)
@given(d=st.floats(0.1, 5.0), a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0))
def test_tail_mass_monotone(d, a, b):
    m = MPModel(d)
    x, y = sorted((m.lambda_minus + a * m.width, m.lambda_minus + b * m.width))
    assert m.tail_mass(x) >= m.tail_mass(y) - 1e-14
