import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from osveta import fixtures
from osveta.classify import VertexClass
from osveta.curvature import AreaMode
from osveta.extract import (
    ASSESSMENT_CRITERIA,
    ELIMINATION_RULES,
    NUMERIC_COLUMNS,
    CriteriaConfig,
    FeatureTable,
    Preset,
    compute_feature_table,
    eliminate_vertices,
    extract,
    order_survivors,
    rank_weights,
    score_vertices,
)
from osveta.mesh import TopologySets, build_adjacency

from conftest import random_rotation


def synthetic_table(n, errors=(), boundary=(), **cols):
    """Table with every column absent except those given."""
    columns = {c: np.full(n, np.nan) for c in NUMERIC_COLUMNS}
    for k, v in cols.items():
        columns[k] = np.asarray(v, dtype=float)
    topo = TopologySets(frozenset(errors), frozenset(boundary))
    return FeatureTable(
        columns, [VertexClass.SIMPLE_SMOOTH] * n, [None] * n, [set() for _ in range(n)],
        topo, (0.0, 0.0), AreaMode.BARYCENTRIC,
    )


@pytest.fixture(scope="module")
def tetra_table():
    return compute_feature_table(fixtures.tetrahedron())


class TestFeatureTable:
    def test_grid_center(self):
        t = compute_feature_table(fixtures.grid(3))
        assert t["kG"][4] == pytest.approx(0, abs=1e-12)
        assert t["theta_deg"][4] == pytest.approx(360, abs=1e-9)
        assert t["c_vis"][4] == pytest.approx(0, abs=1e-15)
        assert t["c_tup"][4] == pytest.approx(90, abs=1e-9)
        assert t["c_dug"][4] == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_tetrahedron(self, tetra_table):
        np.testing.assert_allclose(tetra_table["c_tup"], 60, atol=1e-9)
        np.testing.assert_allclose(tetra_table["c_dug"], 1, atol=1e-12)
        np.testing.assert_allclose(tetra_table["c_vis"], math.sqrt(2 / 3), rtol=1e-12)
        np.testing.assert_allclose(tetra_table["c_el"], 2 / math.sqrt(3), rtol=1e-12)
        assert tetra_table.classes == [VertexClass.CORNER] * 4

    def test_single_triangle(self):
        t = compute_feature_table(fixtures.single_triangle())
        assert t.classes == [VertexClass.BOUNDARY] * 3
        assert np.isnan(t["psi_min"]).all() and np.isnan(t["psi_max"]).all()
        assert all("no-dihedral" in f for f in t.flags)

    def test_topology_errors_flagged(self):
        t = compute_feature_table(fixtures.fin())
        assert {0, 1} <= set(t.topology.errors)
        assert all("topology-error" in t.flags[v] for v in t.topology.errors)

    def test_all_columns_present(self, tetra_table):
        assert tuple(tetra_table.columns) == NUMERIC_COLUMNS
        assert all(len(c) == 4 for c in tetra_table.columns.values())

    def test_csv(self):
        t = compute_feature_table(fixtures.single_triangle())
        lines = t.to_csv().splitlines()
        assert lines[0].split(",") == ["id", *NUMERIC_COLUMNS, "class", "shape", "risky", "flags"]
        assert len(lines) == 4
        row = lines[1].split(",")
        assert row[NUMERIC_COLUMNS.index("psi_min") + 1] == ""
        assert row[-4] == "boundary" and row[-2] == "boundary"

    def test_risky_column(self):
        t = compute_feature_table(fixtures.valence_spike_grid())
        assert t.risky[49] == "valence"
        assert compute_feature_table(fixtures.tetrahedron()).risky == {}

    def test_workers_identical(self):
        m = fixtures.noisy_torus(20, 10)
        a = compute_feature_table(m)
        b = compute_feature_table(m, workers=3)
        for c in NUMERIC_COLUMNS:
            np.testing.assert_array_equal(a[c], b[c])


class TestConfig:
    def test_default_rates(self):
        assert CriteriaConfig().rates == (1.0, 1.0, 1.0, 0.9, 0.8, 0.8, 0.7, 0.4)
        assert len(ASSESSMENT_CRITERIA) == 8

    def test_presets(self):
        assert CriteriaConfig().cuts == (0.5, 99.5)
        assert CriteriaConfig(Preset.EXTENDED).cuts == (2.0, 98.0)
        assert CriteriaConfig("aggressive").cuts == (5.0, 95.0)
        assert CriteriaConfig().with_preset("extended").cuts == (2.0, 98.0)

    def test_rule_rows(self):
        reasons = []
        for r in ELIMINATION_RULES:
            if r.reason not in reasons:
                reasons.append(r.reason)
        assert len(reasons) == 18
        assert all(r.side in ("upper", "lower") and r.subset in ("all", "pos", "neg") for r in ELIMINATION_RULES)

    @pytest.mark.parametrize("kw", [dict(rates=(1.0,) * 7), dict(rates=(2.0,) * 8), dict(percentiles=(50, 50))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CriteriaConfig(**kw)


class TestElimination:
    def test_flat_grid_with_boundary(self):
        m = fixtures.grid(5)
        t = compute_feature_table(m)
        e = eliminate_vertices(t, CriteriaConfig(boundary_elimination=True))
        assert set(e) == set(range(m.n_vertices))
        assert set(e.values()) == {"boundary", "flat"}

    def test_tetrahedron_safe_empty(self, tetra_table):
        assert eliminate_vertices(tetra_table) == {}

    def test_errors_always_eliminated(self):
        t = compute_feature_table(fixtures.fin())
        for preset in Preset:
            e = eliminate_vertices(t, CriteriaConfig(preset))
            assert all(e[v] == "topology" for v in t.topology.errors)

    def test_valence_spike_sphere(self):
        m = fixtures.valence_spike_sphere()
        t = compute_feature_table(m)
        assert len(build_adjacency(m).neighbors[0]) == 10
        # the hub's angle deficit is the smallest positive kG on the sphere
        assert eliminate_vertices(t)[0] == "kG_near_zero"
        # the hub shares its fan faces with 10 others, so the elongation
        # tail needs more than the safe 0.5 percent to reach it
        c_el_only = tuple(r for r in ELIMINATION_RULES if r.reason == "c_el")
        assert 0 not in eliminate_vertices(t, CriteriaConfig(rules=c_el_only))
        e = eliminate_vertices(t, CriteriaConfig(Preset.EXTENDED, rules=c_el_only))
        assert e[0] == "c_el" and len(e) == 11

    def test_percentile_upper_cut(self):
        x = np.arange(1.0, 201.0)
        t = synthetic_table(200, c_dug=x)
        rules = tuple(r for r in ELIMINATION_RULES if r.reason == "c_dug")
        e = eliminate_vertices(t, CriteriaConfig(rules=rules))
        assert e == {0: "c_dug", 199: "c_dug"}

    def test_equal_values_never_cut(self):
        t = synthetic_table(50, c_dug=np.full(50, 3.0), c_vis=np.full(50, 0.2))
        assert eliminate_vertices(t) == {}

    def test_theta_equality_row(self):
        t = synthetic_table(3, theta_deg=[360.0, 360.0 + 1e-7, 359.0])
        e = eliminate_vertices(t, CriteriaConfig(rules=()))
        assert e == {0: "theta", 1: "theta"}

    def test_infinite_elongation(self):
        t = synthetic_table(3, c_el=[1.5, np.inf, 2.0])
        assert eliminate_vertices(t, CriteriaConfig(rules=())) == {1: "c_el"}

    def test_first_reason_wins(self):
        t = synthetic_table(3, errors={2}, boundary={0, 2}, kG=[0.0, 0.0, 0.0], kH=[0.0, 0.0, 0.0])
        e = eliminate_vertices(t, CriteriaConfig(boundary_elimination=True, rules=()))
        assert e == {0: "boundary", 1: "flat", 2: "topology"}

    def test_more_aggressive_eliminates_more(self):
        t = compute_feature_table(fixtures.noisy_torus(30, 16))
        sizes = [len(eliminate_vertices(t, CriteriaConfig(p))) for p in Preset]
        assert sizes == sorted(sizes) and sizes[0] < sizes[-1]


class TestScoring:
    def test_rank_weights(self):
        np.testing.assert_allclose(rank_weights([2.0, 1.0]), [1.0, 0.5])
        np.testing.assert_allclose(rank_weights([1.0, 3.0, 2.0, 3.0]), [0.25, 1.0, 0.5, 1.0])
        assert len(rank_weights([])) == 0

    def test_near_ties_share_rank(self):
        np.testing.assert_allclose(rank_weights([1.0, 1.0 + 1e-13, 0.5]), [1.0, 1.0, 1 / 3])

    def test_only_last_criterion(self):
        t = synthetic_table(1, kG=[2.0])
        assert score_vertices(t, [0])[0] == pytest.approx(0.4)

    def test_no_criterion(self):
        t = synthetic_table(1, kG=[0.0], theta_deg=[360.0])
        assert score_vertices(t, [0])[0] == 0.0

    def test_two_survivors_criterion_one(self):
        t = synthetic_table(2, psi_min=[2.0, 1.0])
        np.testing.assert_allclose(score_vertices(t, [0, 1]), [1.0, 0.5])

    def test_non_survivors_nan(self):
        t = synthetic_table(3, psi_min=[2.0, 1.0, 5.0])
        s = score_vertices(t, [0, 1])
        assert np.isnan(s[2]) and s[0] == 1.0

    def test_custom_rates(self):
        t = synthetic_table(1, kG=[2.0])
        cfg = CriteriaConfig(rates=(1.0,) * 8)
        assert score_vertices(t, [0], cfg)[0] == 1.0

    def test_all_criteria_sum(self):
        # one vertex meeting every criterion that can hold together
        t = synthetic_table(1, psi_min=[1.0], psi_max=[2.0], theta_deg=[300.0], kGI=[1.0], kG=[1.0])
        assert score_vertices(t, [0])[0] == pytest.approx(1.0 + 1.0 + 1.0 + 0.9 + 0.4)

    def test_order_tie_breaks(self):
        t = synthetic_table(4, kG=[1.0, 3.0, 3.0, 2.0])
        scores = np.array([0.5, 0.5, 0.5, 0.9])
        np.testing.assert_array_equal(order_survivors(t, [0, 1, 2, 3], scores), [3, 1, 2, 0])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30))
    def test_weights_in_unit_interval(self, xs):
        w = rank_weights(np.abs(xs))
        assert ((w > 0) & (w <= 1)).all() and w.max() == 1.0


class TestExtract:
    def test_tetrahedron(self, tetra_table):
        r = extract(fixtures.tetrahedron(), 4, table=tetra_table)
        np.testing.assert_array_equal(r.p, [0, 1, 2, 3])
        assert len(set(r.s.tolist())) == 1

    def test_zero_length(self, tetra_table):
        r = extract(fixtures.tetrahedron(), 0, table=tetra_table)
        assert len(r.p) == 0 and len(r.i) == 4 and len(r.s) == 4

    def test_truncated_with_warning(self, tetra_table, caplog):
        r = extract(fixtures.tetrahedron(), 10, table=tetra_table)
        assert len(r.p) == 4
        assert "only 4 survive" in caplog.text

    def test_negative_length(self, tetra_table):
        with pytest.raises(ValueError):
            extract(fixtures.tetrahedron(), -1, table=tetra_table)

    def test_nothing_to_extract(self):
        with pytest.raises(ValueError, match="nothing to extract"):
            extract(fixtures.grid(4), 5, CriteriaConfig(boundary_elimination=True))

    def test_invariants(self):
        m = fixtures.noisy_torus(30, 16)
        r = extract(m, 50)
        assert (np.diff(r.s) <= 0).all()
        assert sorted(r.i.tolist()) == sorted(set(range(m.n_vertices)) - set(r.eliminated))
        np.testing.assert_array_equal(r.p, r.i[:50])

    def test_spike_neighbors_rank_high(self):
        m = fixtures.pulled_vertex_sphere()
        nb = build_adjacency(m).neighbors[0]
        r = extract(m, 10)
        assert set(nb.tolist()) <= set(r.i[:10].tolist())

    def test_json(self, tetra_table):
        d = extract(fixtures.tetrahedron(), 2, table=tetra_table).to_dict()
        assert json.loads(json.dumps(d)) == d
        assert d["p"] == [0, 1] and d["eliminated"] == []

    def test_deterministic_across_workers(self):
        m = fixtures.noisy_torus(30, 16)
        a = extract(m, 100).to_dict()
        b = extract(m, 100, workers=4).to_dict()
        assert json.dumps(a) == json.dumps(b)

    def test_rigid_motion_and_scale(self):
        rng = np.random.default_rng(7)
        m = fixtures.noisy_torus(30, 16)
        base = extract(m, 0).i
        moved = m.transformed(random_rotation(rng), [0.3, -1.0, 2.0])
        np.testing.assert_array_equal(extract(moved, 0).i, base)
        np.testing.assert_array_equal(extract(m.transformed(scale=3.7), 0).i, base)
