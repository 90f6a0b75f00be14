import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from osveta import fixtures
from osveta.curvature import (
    AreaMode,
    DegenerateStarError,
    NoDihedralError,
    curvature_gradient,
    dihedral_angles,
    dihedral_extrema,
    gaussian_curvature,
    mean_curvature_normal,
    mesh_curvature,
    principal_curvatures,
    theta_sum,
    vertex_area,
    vertex_curvature,
)
from osveta.mesh import Mesh, build_adjacency, euler_characteristic, make_star

from conftest import random_rotation


def star_of(mesh, v):
    return build_adjacency(mesh).star(v)


def circumcenter_voronoi_area(p, a, b):
    """Area of the part of triangle (p, a, b) closer to p: the quadrilateral
    p, mid(p, a), circumcenter, mid(p, b). Valid for acute triangles."""
    ab, ac = a - p, b - p
    n = np.cross(ab, ac)
    cc = p + (np.dot(ac, ac) * np.cross(n, ab) + np.dot(ab, ab) * np.cross(ac, n)) / (2 * np.dot(n, n))
    quad = [p, (p + a) / 2, cc, (p + b) / 2]
    return 0.5 * np.linalg.norm(
        np.cross(quad[1] - quad[0], quad[2] - quad[0]) + np.cross(quad[2] - quad[0], quad[3] - quad[0])
    )


class TestArea:
    def test_tetrahedron_barycentric(self, tetra):
        assert vertex_area(star_of(tetra, 0), AreaMode.BARYCENTRIC) == pytest.approx(math.sqrt(3) / 4, abs=1e-12)

    def test_grid_center_barycentric(self):
        assert vertex_area(star_of(fixtures.grid(3), 4), "barycentric") == pytest.approx(1.0)

    def test_equilateral_voronoi_matches_circumcenter(self):
        t = fixtures.single_triangle()
        st_ = star_of(t, 0)
        expected = circumcenter_voronoi_area(*t.vertices[[0, 1, 2]])
        assert vertex_area(st_, AreaMode.VORONOI) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(math.sqrt(3) / 12, rel=1e-12)

    @given(st.floats(0.3, 0.9), st.floats(0.3, 0.9))
    def test_acute_voronoi_matches_circumcenter(self, x, y):
        # keep all angles acute: apex above the middle of the base, tall enough
        p = np.array([0.0, 0, 0])
        a = np.array([1.0, 0, 0])
        b = np.array([x, 0.6 + y, 0])
        m = Mesh([p, a, b], [[0, 1, 2]])
        ang = np.degrees([np.arccos(np.dot(u, w) / np.linalg.norm(u) / np.linalg.norm(w))
                          for u, w in ((a - p, b - p), (p - a, b - a), (p - b, a - b))])
        if ang.max() >= 90:
            return
        assert vertex_area(star_of(m, 0), "voronoi") == pytest.approx(circumcenter_voronoi_area(p, a, b), rel=1e-9)

    def test_obtuse_rules(self):
        # obtuse at vertex 0 -> half; vertex 1 (obtuse elsewhere) -> quarter
        m = Mesh([[0, 0, 0], [1, 0, 0], [-1, 0.2, 0]], [[0, 1, 2]])
        area = m.face_areas[0]
        assert vertex_area(star_of(m, 0), "voronoi") == pytest.approx(area / 2)
        assert vertex_area(star_of(m, 1), "voronoi") == pytest.approx(area / 4)

    @pytest.mark.parametrize("name", ["icosphere2", "torus", "saddle", "grid"])
    def test_barycentric_total_is_surface_area(self, small_fixtures, name):
        m = small_fixtures[name]
        cols, _ = mesh_curvature(m, build_adjacency(m), "barycentric")
        assert np.nansum(cols["area"]) == pytest.approx(m.face_areas.sum(), rel=1e-12)

    def test_voronoi_total_is_surface_area_on_closed_mesh(self, ico3):
        cols, _ = mesh_curvature(ico3, build_adjacency(ico3), "voronoi")
        assert cols["area"].sum() == pytest.approx(ico3.face_areas.sum(), rel=1e-12)

    def test_degenerate_star(self):
        m = Mesh([[0, 0, 0], [1, 0, 0], [2, 0, 0], [5, 5, 5]], [[0, 1, 2]])
        with pytest.raises(DegenerateStarError):
            vertex_area(star_of(m, 0), "barycentric")

    def test_parse(self):
        assert AreaMode.parse("Voronoi") is AreaMode.VORONOI
        with pytest.raises(ValueError):
            AreaMode.parse("hexagonal")


class TestCurvature:
    def test_flat_grid(self):
        st_ = star_of(fixtures.grid(3), 4)
        A = vertex_area(st_)
        np.testing.assert_allclose(mean_curvature_normal(st_, A), 0.0, atol=1e-15)
        assert gaussian_curvature(st_, A) == pytest.approx(0.0, abs=1e-12)
        assert theta_sum(st_) == pytest.approx(360.0, abs=1e-6)
        assert dihedral_extrema(st_) == pytest.approx((0.0, 0.0), abs=1e-9)

    def test_tetrahedron(self, tetra):
        st_ = star_of(tetra, 0)
        A = vertex_area(st_, "barycentric")
        assert gaussian_curvature(st_, A) == pytest.approx(4 * math.pi / math.sqrt(3), rel=1e-12)
        assert theta_sum(st_) == pytest.approx(180.0)
        K = mean_curvature_normal(st_, A)
        axis = tetra.vertices.mean(0) - tetra.vertices[0]
        cos = np.dot(K, axis) / np.linalg.norm(K) / np.linalg.norm(axis)
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_tetrahedron_dihedral_is_normal_angle(self, tetra):
        # angle between outward face normals; flat faces would give 0
        lo, hi = dihedral_extrema(star_of(tetra, 0))
        assert lo == pytest.approx(hi)
        assert hi == pytest.approx(math.degrees(math.acos(-1 / 3)), abs=1e-9)

    def test_roof_crease(self):
        m = fixtures.roof()
        adj = build_adjacency(m)
        crease = [v for v in range(m.n_vertices) if abs(m.vertices[v, 0]) < 1e-12 and adj.star(v).closed]
        assert crease
        for v in crease:
            lo, hi = dihedral_extrema(adj.star(v))
            assert hi == pytest.approx(90.0, abs=1e-9)
            assert lo == pytest.approx(0.0, abs=1e-9)

    def test_concave_crease_is_negative(self):
        m = fixtures.roof()
        v = m.vertices.copy()
        # mirroring keeps the winding, so normals still point up into the valley
        v[:, 2] *= -1
        flipped = Mesh(v, m.faces)
        adj = build_adjacency(flipped)
        center = [k for k in range(m.n_vertices) if abs(v[k, 0]) < 1e-12 and adj.star(k).closed][0]
        assert dihedral_extrema(adj.star(center))[0] == pytest.approx(-90.0, abs=1e-9)

    def test_no_dihedral_on_single_triangle(self):
        with pytest.raises(NoDihedralError):
            dihedral_extrema(star_of(fixtures.single_triangle(), 0))

    def test_saddle_center_has_angle_excess(self):
        m = fixtures.saddle_grid(9)
        center = int(np.argmin(np.linalg.norm(m.vertices[:, :2], axis=1)))
        assert theta_sum(star_of(m, center)) > 360.0

    @pytest.mark.parametrize("mode", list(AreaMode))
    def test_sphere_means(self, ico3, mode):
        cols, _ = mesh_curvature(ico3, build_adjacency(ico3), mode)
        assert np.mean(cols["kG"]) == pytest.approx(1.0, rel=0.05)
        assert np.mean(np.abs(cols["kH"])) == pytest.approx(1.0, rel=0.05)

    def test_outward_sphere_has_negative_mean_curvature(self, ico3):
        cols, _ = mesh_curvature(ico3, build_adjacency(ico3))
        assert np.all(cols["kH"] < 0)

    def test_boundary_flag(self):
        c = vertex_curvature(star_of(fixtures.grid(3), 0))
        assert "boundary-partial" in c.flags

    def test_scaling(self, small_fixtures):
        m = small_fixtures["icosphere2"]
        c = 3.0
        a, _ = mesh_curvature(m, build_adjacency(m))
        b, _ = mesh_curvature(m.transformed(scale=c), build_adjacency(m.transformed(scale=c)))
        np.testing.assert_allclose(b["kG"], a["kG"] / c**2, rtol=1e-9)
        np.testing.assert_allclose(b["kH"], a["kH"] / c, rtol=1e-9)
        np.testing.assert_allclose(b["theta_deg"], a["theta_deg"], rtol=1e-12)
        np.testing.assert_allclose(b["psi_max"], a["psi_max"], rtol=1e-9)


class TestPrincipal:
    def test_umbilic(self):
        assert principal_curvatures(2, 4)[:3] == (2, 2, 0)

    def test_saddle(self):
        k1, k2, d, clamped = principal_curvatures(0.0, -1.0)
        assert (k1, k2, d, clamped) == (1.0, -1.0, 1.0, False)

    def test_clamped(self):
        k1, k2, d, clamped = principal_curvatures(1.0, 2.0)
        assert (k1, k2, d, clamped) == (1.0, 1.0, 0.0, True)

    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_consistency(self, kH, kG):
        k1, k2, _, clamped = principal_curvatures(kH, kG)
        assert k1 >= k2
        if not clamped:
            scale = max(1.0, abs(kG), kH * kH)
            assert abs(k1 * k2 - kG) <= 1e-9 * scale
            assert abs((k1 + k2) / 2 - kH) <= 1e-9 * max(1.0, abs(kH))


class TestGaussBonnet:
    @pytest.mark.parametrize("mode", list(AreaMode))
    @pytest.mark.parametrize(
        "mesh",
        [fixtures.tetrahedron(), fixtures.icosphere(1), fixtures.icosphere(2), fixtures.torus()],
        ids=["tetra", "ico1", "ico2", "torus"],
    )
    def test_total_curvature(self, mesh, mode):
        adj = build_adjacency(mesh)
        cols, _ = mesh_curvature(mesh, adj, mode)
        total = np.sum(cols["kG"] * cols["area"])
        expected = 2 * math.pi * euler_characteristic(mesh, adj)
        assert abs(total - expected) <= 1e-9 * max(abs(expected), 2 * math.pi * mesh.n_vertices)


class TestGradient:
    def test_constant_field(self):
        m = fixtures.grid(4)
        g = curvature_gradient(np.full(m.n_vertices, 3.0), m, build_adjacency(m))
        np.testing.assert_array_equal(g, 0.0)

    def test_linear_field_slope(self):
        # the diagonal neighbors see |dx| / sqrt(2), axis neighbors see 1
        m = fixtures.grid(4)
        g = curvature_gradient(m.vertices[:, 0], m, build_adjacency(m))
        np.testing.assert_allclose(g, 1.0)

    def test_sphere_kG_is_nearly_uniform_with_voronoi_area(self, ico3):
        adj = build_adjacency(ico3)
        cols, _ = mesh_curvature(ico3, adj, "voronoi")
        g = curvature_gradient(cols["kG"], ico3, adj)
        assert np.max(g) < 0.05 * np.mean(np.abs(cols["kG"]))

    def test_sphere_kG_barycentric_jumps_only_near_valence_five(self, ico3):
        # one third of each triangle over-weights the 12 original icosahedron vertices
        adj = build_adjacency(ico3)
        cols, _ = mesh_curvature(ico3, adj, "barycentric")
        g = curvature_gradient(cols["kG"], ico3, adj)
        five = [v for v in range(ico3.n_vertices) if adj.valence(v) == 5]
        near = set(five).union(*(adj.neighbors[v].tolist() for v in five))
        far = np.setdiff1d(np.arange(ico3.n_vertices), sorted(near))
        assert len(five) == 12
        assert np.max(g[far]) < 0.05 * np.mean(np.abs(cols["kG"]))

    def test_isolated_vertex_is_undefined(self, tetra):
        m = Mesh(np.vstack([tetra.vertices, [[3, 3, 3]]]), tetra.faces)
        g = curvature_gradient(np.arange(5.0), m, build_adjacency(m))
        assert np.isnan(g[4]) and np.isfinite(g[:4]).all()


@given(st.integers(0, 2**32 - 1))
def test_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    m = fixtures.saddle_grid(6)
    moved = m.transformed(random_rotation(rng), rng.normal(size=3) * 10)
    a, _ = mesh_curvature(m, build_adjacency(m))
    b, _ = mesh_curvature(moved, build_adjacency(moved))
    for c in a:
        np.testing.assert_allclose(b[c], a[c], rtol=1e-9, atol=1e-9 * np.nanmax(np.abs(a[c])), err_msg=c)


def test_make_star_from_arbitrary_face_order():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], float)
    tris = [(0, 3, 4), (0, 1, 2), (0, 4, 1), (0, 2, 3)]
    st_ = make_star(0, v, tris)
    assert st_.closed and st_.ring[0] == 1
    assert theta_sum(st_) == pytest.approx(360.0)


def _flip_some_faces(mesh: Mesh, every: int = 7) -> Mesh:
    f = mesh.faces.copy()
    f[::every] = f[::every, ::-1]
    return Mesh(mesh.vertices, f)


class TestMeshRouteMatchesStars:
    """The whole-mesh accumulation against one star at a time."""

    @pytest.mark.parametrize("mode", list(AreaMode))
    @pytest.mark.parametrize(
        "mesh",
        [fixtures.icosphere(2), fixtures.torus(12, 8), fixtures.saddle_grid(7), fixtures.roof(),
         fixtures.fin(), fixtures.sphere_and_saddle(2, 12), _flip_some_faces(fixtures.icosphere(2))],
        ids=["ico", "torus", "saddle", "roof", "fin", "sphere-saddle", "mis-wound"],
    )
    def test_columns(self, mesh, mode):
        adj = build_adjacency(mesh)
        cols, flags = mesh_curvature(mesh, adj, mode)
        for v in range(mesh.n_vertices):
            st_ = adj.star(v)
            if st_ is None:
                assert np.isnan(cols["kG"][v]) and "no-star" in flags[v]
                continue
            c = vertex_curvature(st_, mode)
            scale = max(abs(c.kH), math.sqrt(abs(c.kG)), 1.0)
            for name, x in (("kG", c.kG), ("kH", c.kH), ("k1", c.k1), ("k2", c.k2)):
                tol = 1e-9 * (scale * scale if name == "kG" else scale)
                assert abs(cols[name][v] - x) <= tol, (v, name)
            assert cols["area"][v] == pytest.approx(c.area, rel=1e-12)
            assert cols["theta_deg"][v] == pytest.approx(theta_sum(st_), rel=1e-12)
            assert c.flags <= flags[v]
            d = dihedral_angles(st_)
            if len(d):
                assert cols["psi_min"][v] == pytest.approx(d.min(), abs=1e-9)
                assert cols["psi_max"][v] == pytest.approx(d.max(), abs=1e-9)
            else:
                assert np.isnan(cols["psi_min"][v]) and "no-dihedral" in flags[v]
