import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from pmelab.errors import GridError
from pmelab.grids import (
    BoxGeometry,
    GridField,
    RadialGeometry,
    constant_field,
    gaussian_field,
    mu_c_field,
    sphere_area,
    unit_ball_volume,
    _radial_mass_integral,
)
from pmelab.params import ProblemParams
from pmelab.special import mu_c_profile

P124 = ProblemParams(1, 2.0, 4.0)   # borderline decay in 1D
P125 = ProblemParams(1, 2.0, 5.0)   # power decay in 1D
P223 = ProblemParams(2, 2.0, 3.0)   # borderline decay in 2D
P224 = ProblemParams(2, 2.0, 4.0)   # power decay in 2D
P324 = ProblemParams(3, 2.0, 4.0)

# Head integrals of the singular optimal profile over the ball of radius R,
# frozen from a 30-digit quadrature (log substitution, interval split
# [log 1/R, 10, 40, inf]).  The borderline integrand decays like w^(-N/2-1),
# slow enough that scipy.quad's infinite-interval transform visibly
# undershoots it, so the independent oracle had to be arbitrary-precision.
HEAD_1D_124_R05 = 3.7752235739724501
HEAD_1D_124_R18 = 2.7061828865540759
HEAD_2D_223_R05 = 5.3116230595434439
HEAD_2D_223_R18 = 2.8488268226264467


# ---------------------------------------------------------------------------
# volumes

def test_unit_ball_volume_values():
    assert unit_ball_volume(1) == 2.0
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)
    assert unit_ball_volume(4) == pytest.approx(math.pi ** 2 / 2.0, rel=1e-15)
    assert unit_ball_volume(5) == pytest.approx(8.0 * math.pi ** 2 / 15.0, rel=1e-15)


def test_sphere_area_values():
    assert sphere_area(1) == 2.0
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)


# ---------------------------------------------------------------------------
# geometries

def test_box_from_extent_and_props():
    g = BoxGeometry.from_extent([-1.0], [1.0], 0.125)
    assert g.N == 1
    assert g.shape == (16,)
    assert g.hi == (1.0,)
    assert g.cell_volume == 0.125
    c = g.centers()
    assert c[0] == pytest.approx(-0.9375)
    assert c[-1] == pytest.approx(0.9375)
    assert g.contains(0.99) and not g.contains(1.01)


def test_box_2d_mesh():
    g = BoxGeometry.from_extent([-1.0, 0.0], [1.0, 1.0], 0.25)
    assert g.shape == (8, 4)
    X, Y = g.center_mesh()
    assert X.shape == (8, 4)
    assert X[0, 0] == pytest.approx(-0.875)
    assert Y[0, 0] == pytest.approx(0.125)
    assert g.contains((0.5, 0.5)) and not g.contains((0.5, 1.5))


def test_box_rejects_bad_input():
    with pytest.raises(GridError):
        BoxGeometry.from_extent([-1.0], [1.0], 0.3)      # extent not a multiple
    with pytest.raises(GridError):
        BoxGeometry.from_extent([-1.0], [1.0, 1.0], 0.5)
    with pytest.raises(GridError):
        BoxGeometry(3, (0.0, 0.0, 0.0), (4, 4, 4), 0.25)
    with pytest.raises(GridError):
        BoxGeometry(1, (0.0,), (4,), 0.25, boundary="dirichlet")
    with pytest.raises(GridError):
        BoxGeometry(1, (0.0,), (0,), 0.25)
    with pytest.raises(GridError):
        BoxGeometry(1, (0.0,), (4,), -0.25)
    with pytest.raises(GridError):
        BoxGeometry(2, (0.0,), (4, 4), 0.25)             # lo length mismatch


def test_radial_geometry():
    g = RadialGeometry.from_extent(2.0, 0.125, N=3)
    assert g.n_cells == 16
    assert g.r_max == 2.0
    assert g.shape == (16,)
    assert g.centers()[0] == pytest.approx(0.0625)
    f = g.faces()
    assert f[0] == 0.0 and f[-1] == 2.0
    # shell volumes add up to the full ball
    assert np.sum(g.shell_volumes()) == pytest.approx(
        unit_ball_volume(3) * 8.0, rel=1e-14)


def test_radial_rejects_bad_input():
    with pytest.raises(GridError):
        RadialGeometry(0, 4, 0.25)
    with pytest.raises(GridError):
        RadialGeometry(2.5, 4, 0.25)
    with pytest.raises(GridError):
        RadialGeometry(2, 0, 0.25)
    with pytest.raises(GridError):
        RadialGeometry(2, 4, 0.0)
    with pytest.raises(GridError):
        RadialGeometry.from_extent(1.0, 0.3, N=1)


# ---------------------------------------------------------------------------
# fields

def test_field_validation():
    g = BoxGeometry.from_extent([0.0], [1.0], 0.25)
    with pytest.raises(GridError):
        GridField(g, np.ones(5))
    with pytest.raises(GridError):
        GridField(g, np.array([1.0, -0.1, 0.0, 0.0]))
    with pytest.raises(GridError):
        GridField(g, np.array([1.0, np.nan, 0.0, 0.0]))
    f = GridField(g, np.array([1.0, 2.0, 0.5, 0.0]))
    assert f.linf() == 2.0
    assert f.mass() == pytest.approx(3.5 * 0.25, rel=1e-15)
    f2 = f.with_values(np.zeros(4))
    assert f2.mass() == 0.0 and f.linf() == 2.0


def test_constant_field_mass():
    g = BoxGeometry.from_extent([-1.0, -1.0], [1.0, 1.0], 0.125)
    f = constant_field(g, 3.0)
    assert f.mass() == pytest.approx(12.0, rel=1e-14)
    gr = RadialGeometry(3, 8, 0.25)
    fr = constant_field(gr, 2.0)
    assert fr.mass() == pytest.approx(2.0 * unit_ball_volume(3) * 2.0 ** 3, rel=1e-13)
    with pytest.raises(GridError):
        constant_field(g, -1.0)


def test_gaussian_field_box():
    g = BoxGeometry.from_extent([-4.0], [4.0], 0.125)
    f = gaussian_field(g, 2.0, 0.5)
    assert f.linf() <= 2.0
    assert np.array_equal(f.values, f.values[::-1])     # centered: symmetric
    # midpoint sums of an analytic profile with tiny boundary values converge
    # fast enough that the domain truncation dominates
    assert f.mass() == pytest.approx(2.0 * math.sqrt(2 * math.pi) * 0.5, rel=1e-12)


def test_gaussian_field_shifted_2d():
    g = BoxGeometry.from_extent([-2.0, -2.0], [2.0, 2.0], 0.25)
    f = gaussian_field(g, 1.0, 0.3, center=(0.625, -0.375))
    X, Y = g.center_mesh()
    i, j = np.unravel_index(np.argmax(f.values), f.values.shape)
    assert (X[i, j], Y[i, j]) == (0.625, -0.375)
    assert f.linf() == 1.0


def test_gaussian_field_radial():
    g = RadialGeometry(3, 32, 0.125)
    f = gaussian_field(g, 1.0, 0.5)
    assert np.all(np.diff(f.values) < 0)
    with pytest.raises(GridError):
        gaussian_field(g, 1.0, 0.5, center=(1.0,))
    with pytest.raises(GridError):
        gaussian_field(g, -1.0, 0.5)
    with pytest.raises(GridError):
        gaussian_field(g, 1.0, 0.0)


# ---------------------------------------------------------------------------
# singular data: head integrals

def test_head_integral_power_branch():
    # closed form c * A_N * R^(N-s) / (N-s), s = 2/(p-m)
    assert _radial_mass_integral(0.5, 1.0, P125) == pytest.approx(
        6.0 * 0.5 ** (1.0 / 3.0), rel=1e-15)
    assert _radial_mass_integral(0.25, 2.0, P324) == pytest.approx(
        2.0 * math.pi * 2.0 * 0.25 ** 2, rel=1e-15)
    assert _radial_mass_integral(0.0, 1.0, P125) == 0.0


def test_head_integral_borderline_branch():
    assert _radial_mass_integral(0.5, 1.0, P124) == pytest.approx(
        HEAD_1D_124_R05, rel=1e-13)
    assert _radial_mass_integral(0.125, 1.0, P124) == pytest.approx(
        HEAD_1D_124_R18, rel=1e-13)
    assert _radial_mass_integral(0.5, 1.0, P223) == pytest.approx(
        HEAD_2D_223_R05, rel=1e-13)
    assert _radial_mass_integral(0.125, 1.0, P223) == pytest.approx(
        HEAD_2D_223_R18, rel=1e-13)
    # linear in c
    assert _radial_mass_integral(0.5, 7.0, P124) == pytest.approx(
        7.0 * HEAD_1D_124_R05, rel=1e-13)


# ---------------------------------------------------------------------------
# singular data: cell-averaged fields

def test_mu_c_field_box1_power():
    g = BoxGeometry.from_extent([-1.0], [1.0], 0.125)
    f = mu_c_field(g, 1.0, P125)
    # head cell [0, h]: average of |x|^(-2/3) is 3 h^(-2/3)
    assert f.values[8] == pytest.approx(3.0 * 0.125 ** (-2.0 / 3.0), rel=1e-13)
    assert f.values[7] == f.values[8]                    # mirror cell
    # interior cell [a, b]: 3 c (b^(1/3) - a^(1/3)) / h
    a, b = 0.375, 0.5
    assert f.values[11] == pytest.approx(
        3.0 * (b ** (1 / 3) - a ** (1 / 3)) / 0.125, rel=1e-12)
    assert np.array_equal(f.values, f.values[::-1])
    assert np.all(np.diff(f.values[8:]) < 0)


def test_mu_c_field_box1_origin_inside_cell():
    # origin strictly inside cell 0 -> two one-sided heads
    g = BoxGeometry(1, (-0.0625,), (16,), 0.125)
    f = mu_c_field(g, 2.0, P125)
    assert f.values[0] == pytest.approx(
        2.0 * 2.0 * 3.0 * 0.0625 ** (1.0 / 3.0) / 0.125, rel=1e-13)


def test_mu_c_field_box1_borderline_mass():
    # sum of exact cell integrals telescopes to the head integral
    g = BoxGeometry.from_extent([-0.5], [0.5], 0.125)
    f = mu_c_field(g, 1.0, P124)
    assert f.mass() == pytest.approx(HEAD_1D_124_R05, rel=1e-12)


def test_mu_c_field_box2_power():
    g = BoxGeometry.from_extent([-1.0, -1.0], [1.0, 1.0], 0.25)
    f = mu_c_field(g, 1.0, P224)
    h = 0.25
    # quadrant cell [0,h]^2 of |x|^(-1): integral is 2 h log(1+sqrt 2)
    assert f.values[4, 4] == pytest.approx(
        2.0 * math.log(1.0 + math.sqrt(2.0)) / h, rel=1e-12)
    # total mass of |x|^(-1) over [-1,1]^2 is 8 log(1+sqrt 2)
    assert f.mass() == pytest.approx(
        8.0 * math.log(1.0 + math.sqrt(2.0)), rel=1e-12)
    # smooth cell against adaptive 2D quadrature
    val, err = dblquad(lambda y, x: 1.0 / math.hypot(x, y),
                       0.5, 0.75, 0.25, 0.5, epsabs=1e-14, epsrel=1e-13)
    assert err < 1e-10
    assert f.values[6, 5] == pytest.approx(val / h ** 2, rel=1e-12)


def test_mu_c_field_box2_symmetry():
    g = BoxGeometry.from_extent([-0.5, -0.5], [0.5, 0.5], 0.125)
    f = mu_c_field(g, 1.0, P223)
    v = f.values
    assert np.allclose(v, v[::-1, :], rtol=1e-13, atol=0.0)
    assert np.allclose(v, v[:, ::-1], rtol=1e-13, atol=0.0)
    assert np.allclose(v, v.T, rtol=1e-13, atol=0.0)


def test_mu_c_field_box2_borderline_mass():
    # square = ball of radius R plus four smooth corner slivers
    R = 0.5
    g = BoxGeometry.from_extent([-R, -R], [R, R], 0.125)
    f = mu_c_field(g, 1.0, P223)
    corner, err = dblquad(
        lambda y, x: mu_c_profile(math.hypot(x, y), 1.0, P223),
        0.0, R, lambda x: math.sqrt(max(R * R - x * x, 0.0)), lambda x: R,
        epsabs=1e-13, epsrel=1e-12)
    assert err < 1e-10
    assert f.mass() == pytest.approx(HEAD_2D_223_R05 + 4.0 * corner, rel=1e-11)


def test_mu_c_field_radial_power():
    g = RadialGeometry(3, 16, 0.25)
    f = mu_c_field(g, 2.0, P324)
    fc = g.faces()
    # c/r averaged over a shell: (3c/2)(b^2-a^2)/(b^3-a^3)
    exact = 1.5 * 2.0 * (fc[1:] ** 2 - fc[:-1] ** 2) / (fc[1:] ** 3 - fc[:-1] ** 3)
    assert np.allclose(f.values, exact, rtol=1e-13, atol=0.0)
    assert f.mass() == pytest.approx(2.0 * math.pi * 2.0 * 4.0 ** 2, rel=1e-13)


def test_mu_c_field_radial_borderline():
    g = RadialGeometry(2, 4, 0.125)
    f = mu_c_field(g, 1.0, P223)
    sv = g.shell_volumes()
    assert f.values[0] == pytest.approx(HEAD_2D_223_R18 / sv[0], rel=1e-12)
    assert f.mass() == pytest.approx(HEAD_2D_223_R05, rel=1e-12)


def test_mu_c_field_rejections():
    g1 = BoxGeometry.from_extent([-1.0], [1.0], 0.25)
    with pytest.raises(GridError):
        mu_c_field(g1, 1.0, ProblemParams(1, 1.0, 2.5))   # decays too slowly
    with pytest.raises(GridError):
        mu_c_field(g1, 0.0, P125)
    with pytest.raises(GridError):
        mu_c_field(g1, -2.0, P125)
    with pytest.raises(GridError):
        mu_c_field(g1, 1.0, P224)                         # dimension mismatch
    with pytest.raises(GridError):
        mu_c_field(RadialGeometry(3, 8, 0.25), 1.0, P224)
