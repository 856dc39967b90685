import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confcover import meshgen
from confcover.beltrami import (
    BeltramiError,
    BeltramiField,
    ConstraintKind,
    PointConstraint,
    beltrami_from_map,
    beltrami_to_surface,
    cayley,
    cayley_inv,
    lbs_solve,
    max_dilation,
    surface_to_plane_beltrami,
)
from confcover.harmonic import signed_areas


def disk_xy(n_rings=10):
    m = meshgen.flat_disk(n_rings)
    return m, m.vertices[:, :2].copy()


def random_disk_points(rng, n, r=0.999):
    rad = r * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * np.pi, size=n)
    return rad * np.exp(1j * t)


def smooth_qc(xy):
    """A smooth orientation-preserving deformation of the unit disk with varying mu."""
    x, y = xy[:, 0], xy[:, 1]
    return np.column_stack([x + 0.15 * np.sin(2 * y) + 0.1 * x * y, y + 0.2 * x**2 - 0.05 * np.cos(3 * x)])


def boundary_pins(m, target):
    return [PointConstraint(int(v), complex(*target[v])) for v in m.boundary]


# -- Beltrami coefficient ------------------------------------------------------


def test_identity_mu_zero():
    m, xy = disk_xy()
    assert np.abs(beltrami_from_map(xy, xy, m.faces).mu).max() < 1e-14


def test_stretch_x_mu_one_third():
    m, xy = disk_xy()
    mu = beltrami_from_map(xy, xy * [2.0, 1.0], m.faces).mu
    assert np.abs(mu - 1 / 3).max() < 1e-14


def test_holomorphic_square_converges():
    # z^2 on the disk |z - 1| <= 0.3 (away from the critical point 0); the
    # piecewise-linear error in mu is first order in the mesh size
    errs = []
    for n in (12, 24):
        m = meshgen.flat_disk(n)
        z = (m.vertices[:, 0] + 1j * m.vertices[:, 1]) * 0.3 + 1.0
        src = np.column_stack([z.real, z.imag])
        mu = beltrami_from_map(src, z**2, m.faces).mu
        errs.append(np.abs(mu).max())
    assert errs[1] <= 1e-2
    assert errs[1] < 0.6 * errs[0]


def test_mu_matches_singular_value_ratio(rng):
    m, xy = disk_xy(6)
    tgt = smooth_qc(xy)
    mu = np.abs(beltrami_from_map(xy, tgt, m.faces).mu)
    for t, f in enumerate(m.faces):
        S = np.column_stack([xy[f[1]] - xy[f[0]], xy[f[2]] - xy[f[0]]])
        T = np.column_stack([tgt[f[1]] - tgt[f[0]], tgt[f[2]] - tgt[f[0]]])
        s = np.linalg.svd(T @ np.linalg.inv(S), compute_uv=False)
        assert abs(mu[t] - (s[0] - s[1]) / (s[0] + s[1])) < 1e-10


def test_zero_area_source_face():
    xy = np.array([[0, 0], [1, 0], [2, 0]], dtype=float)
    with pytest.raises(BeltramiError, match="zero source-face area"):
        beltrami_from_map(xy, xy, np.array([[0, 1, 2]]))


def test_surface_variants_are_inverse_pairs(hemisphere):
    rng = np.random.default_rng(3)
    xy = hemisphere.vertices[:, :2] + 0.01 * rng.normal(size=(hemisphere.n_vertices, 2))
    fwd = surface_to_plane_beltrami(hemisphere.vertices, hemisphere.faces, xy).mu
    inv = beltrami_to_surface(xy, hemisphere.faces, hemisphere.vertices).mu
    # |mu of an inverse| equals |mu| of the map (mu_{f^-1} = -mu_f (f_z/|f_z|)^2 composed)
    assert np.abs(np.abs(fwd) - np.abs(inv)).max() < 1e-10


def test_field_csv(tmp_path):
    f = BeltramiField(np.array([0.1 + 0.2j, -0.3j]))
    p = tmp_path / "mu.csv"
    f.write_csv(p)
    rows = p.read_text().splitlines()
    assert rows[0] == "face_id,re_mu,im_mu,abs_mu"
    assert [float(x) for x in rows[2].split(",")] == [1, 0, -0.3, 0.3]


# -- maximum dilation ----------------------------------------------------------------


def test_dilation_conformal_is_one():
    assert max_dilation(BeltramiField(np.zeros(4, complex))) == 1.0


def test_dilation_one_third():
    assert max_dilation(BeltramiField(np.array([0.1, 1 / 3 * 1j]))) == pytest.approx(2.0, abs=1e-14)


def test_dilation_near_one():
    k = max_dilation(BeltramiField(np.array([0.9999])))
    assert np.isfinite(k) and k == pytest.approx(19999, rel=1e-9)


def test_dilation_rejects_unit_mu():
    with pytest.raises(BeltramiError, match="map not orientation-preserving"):
        max_dilation(BeltramiField(np.array([0.2, 1.0])))


# -- Cayley pair -------------------------------------------------------------------


def test_cayley_values():
    assert cayley(0) == 1j
    assert abs(cayley(-1)) < 1e-15
    assert abs(cayley(1j) - (-1)) < 1e-15
    assert abs(cayley(-1j) - 1) < 1e-15


def test_cayley_round_trip_and_circle(rng):
    z = random_disk_points(rng, 1000)
    assert np.abs(cayley_inv(cayley(z)) - z).max() < 1e-12
    assert np.all(cayley(z).imag > 0)
    t = rng.uniform(0.01, 2 * np.pi - 0.01, size=1000)
    assert np.abs(cayley(np.exp(1j * t)).imag).max() < 1e-12


def test_cayley_poles():
    with pytest.raises(ZeroDivisionError):
        cayley(1.0)
    with pytest.raises(ZeroDivisionError):
        cayley_inv(-1j)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.999), st.floats(0, 2 * np.pi))
def test_cayley_bijection_property(r, t):
    z = r * np.exp(1j * t)
    w = cayley(z)
    assert w.imag > 0
    assert abs(cayley_inv(w) - z) < 1e-12


# -- linear Beltrami solver ------------------------------------------------------------


def test_lbs_identity_three_pins():
    m, xy = disk_xy()
    pins = [PointConstraint(int(v), complex(*xy[v])) for v in m.boundary[[0, 20, 40]]]
    out = lbs_solve(xy, m.faces, np.zeros(m.n_faces, complex), pins)
    assert np.abs(out - xy).max() < 1e-10


def test_lbs_constant_one_third():
    m, xy = disk_xy()
    tgt = xy * [2.0, 1.0]
    pins = [PointConstraint(int(v), complex(*tgt[v])) for v in m.boundary[[0, 20, 40]]]
    out = lbs_solve(xy, m.faces, np.full(m.n_faces, 1 / 3 + 0j), pins)
    assert np.abs(beltrami_from_map(xy, out, m.faces).mu - 1 / 3).max() < 1e-8
    assert np.abs(out - tgt).max() < 1e-9


def test_lbs_known_deformation_round_trip():
    m, xy = disk_xy(12)
    tgt = smooth_qc(xy)
    mu = beltrami_from_map(xy, tgt, m.faces)
    assert mu.sup_abs() < 1 and np.std(np.abs(mu.mu)) > 1e-3  # genuinely non-constant
    out = lbs_solve(xy, m.faces, mu, boundary_pins(m, tgt))
    assert np.sqrt(np.mean(np.sum((out - tgt) ** 2, axis=1))) < 1e-6
    assert np.abs(beltrami_from_map(xy, out, m.faces).mu - mu.mu).max() < 1e-8
    assert np.all(signed_areas(out, m.faces) > 0)


def test_lbs_composition_is_conformal():
    # mu prescribed as that of phi^-1 and solved on the image mesh: f o phi has mu ~ 0
    m, xy = disk_xy(10)
    img = smooth_qc(xy)
    mu_inv = beltrami_from_map(img, xy, m.faces)
    f = lbs_solve(img, m.faces, mu_inv, boundary_pins(m, xy))
    comp = beltrami_from_map(xy, f, m.faces).mu
    assert np.abs(comp).max() <= 1e-6
    assert np.abs(comp).max() < np.abs(mu_inv.mu).max()


def test_lbs_imaginary_zero_constraints():
    # upper half-disk: real-axis vertices keep Im = 0, three pins fix the rest
    m, xy = disk_xy(8)
    z = xy[:, 0] + 1j * xy[:, 1]
    w = cayley(0.5 * z)  # maps the disk into the upper half-plane, smooth
    src = np.column_stack([w.real, w.imag])
    on_axis = [PointConstraint(int(v), 0j, ConstraintKind.FIXED_IMAGINARY_ZERO) for v in m.boundary[:5]]
    pins = [PointConstraint(int(v), complex(w[v])) for v in m.boundary[[10, 20, 30]]]
    out = lbs_solve(src, m.faces, np.zeros(m.n_faces, complex), on_axis + pins)
    assert np.all(out[m.boundary[:5], 1] == 0.0)


def test_lbs_too_few_pins():
    m, xy = disk_xy(4)
    with pytest.raises(BeltramiError, match="at least 3"):
        lbs_solve(xy, m.faces, np.zeros(m.n_faces, complex), [PointConstraint(0, 0j), PointConstraint(1, 1 + 0j)])


def test_lbs_collinear_pins():
    m, xy = disk_xy(4)
    pins = [PointConstraint(i, complex(i, 0)) for i in range(3)]
    with pytest.raises(BeltramiError, match="collinear"):
        lbs_solve(xy, m.faces, np.zeros(m.n_faces, complex), pins)


def test_lbs_conflicting_pins():
    m, xy = disk_xy(4)
    pins = [PointConstraint(0, 0j), PointConstraint(0, 1j), PointConstraint(1, 1), PointConstraint(2, 1j)]
    with pytest.raises(BeltramiError, match="conflict"):
        lbs_solve(xy, m.faces, np.zeros(m.n_faces, complex), pins)


def test_lbs_rejects_unit_mu():
    m, xy = disk_xy(4)
    mu = np.zeros(m.n_faces, complex)
    mu[5] = 1.0
    pins = [PointConstraint(int(v), complex(*xy[v])) for v in m.boundary[[0, 8, 16]]]
    with pytest.raises(BeltramiError, match="face 5"):
        lbs_solve(xy, m.faces, mu, pins)


def test_lbs_rejects_nonfinite_source():
    m, xy = disk_xy(4)
    xy[3, 0] = np.inf
    with pytest.raises(BeltramiError, match="non-finite"):
        lbs_solve(xy, m.faces, np.zeros(m.n_faces, complex), [])


def test_lbs_positive_jacobian_random_mu(rng):
    m, xy = disk_xy(10)
    mu = 0.4 * rng.uniform(size=m.n_faces) * np.exp(2j * np.pi * rng.uniform(size=m.n_faces))
    mu = np.convolve(mu, np.ones(5) / 5, mode="same")  # mildly smooth
    out = lbs_solve(xy, m.faces, mu, boundary_pins(m, xy))
    assert np.all(signed_areas(out, m.faces) > 0)
