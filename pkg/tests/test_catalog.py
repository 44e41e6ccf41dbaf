import numpy as np
import pytest

from weyl4.catalog import (
    CatalogError,
    builtin_manifolds,
    conformally_rescaled,
    get_manifold,
    load_manifold_config,
    normalize_tag,
    spec_to_config,
    validate_spec,
)
from weyl4.conditions import point_context, run_suite
from weyl4.curvature import curvature_bundle

EXPECTED_IDS = {
    "euclidean_flat",
    "flat_torus",
    "fubini_study_cp2",
    "complex_hyperbolic_ch2",
    "kahler_potential_generic",
    "kodaira_thurston",
    "round_conformal",
    "perturbed_j",
}


class TestBuiltins:
    def test_ids_and_required_entries(self):
        specs = {s.id: s for s in builtin_manifolds()}
        assert set(specs) == EXPECTED_IDS
        assert specs["flat_torus"].compact
        assert specs["kodaira_thurston"].compact
        assert specs["flat_torus"].domain == ((0.0, 2.0 * np.pi),) * 4
        assert {"flat", "kahler"} <= set(specs["flat_torus"].tags)
        assert {"einstein", "kahler", "constant-s"} <= set(specs["fubini_study_cp2"].tags)
        assert {"almost-kahler", "constant-s"} <= set(specs["kodaira_thurston"].tags)

    def test_all_specs_validate(self):
        for spec in builtin_manifolds():
            assert validate_spec(spec) == []

    def test_fubini_einstein_engine_verified(self):
        spec = get_manifold("fubini_study_cp2")
        rng = np.random.default_rng(0)
        for pt in spec.sample_points(5, rng):
            b = curvature_bundle(spec.metric_point(pt, 2))
            assert np.abs(b.ric_v - (b.S_v / 4.0) * np.eye(4)).max() < 1e-8 * abs(b.S_v)

    def test_kahler_entries_parallel_j(self, catalog):
        # end-to-end pipeline validation: potential-derived metrics have
        # nabla J = 0 with the standard constant J
        rng = np.random.default_rng(1)
        for name in (
            "euclidean_flat", "flat_torus", "fubini_study_cp2",
            "complex_hyperbolic_ch2", "kahler_potential_generic",
        ):
            spec = catalog[name]
            worst = 0.0
            for pt in spec.sample_points(50, rng):
                ctx = point_context(spec, pt, 2)
                worst = max(worst, ctx.nj.nabla_j_norm)
            assert worst < 1e-9, name

    def test_kodaira_thurston_strictly_almost_kahler(self):
        spec = get_manifold("kodaira_thurston")
        ctx = point_context(spec, [0.01, 0.02, 0.03, 0.04], 2)
        assert ctx.nj.d_omega_norm < 1e-10
        assert ctx.nj.nijenhuis_norm > 0.5

    def test_perturbed_j_generic(self):
        spec = get_manifold("perturbed_j")
        ctx = point_context(spec, [0.5, 0.1, -0.4, 0.2], 2)
        assert ctx.nj.d_omega_norm > 1e-4
        assert ctx.nj.nijenhuis_norm > 1e-4

    def test_builtins_pass_their_tags(self, catalog):
        for spec in catalog.values():
            rep = run_suite(spec, 4, seed=2, identities=["EQ42"])
            assert all(v["confirmed"] for v in rep.tags.values()), spec.id

    def test_unknown_manifold(self):
        with pytest.raises(CatalogError):
            get_manifold("nope")


class TestConformalRescale:
    def test_rescaled_metric_values(self):
        spec = get_manifold("euclidean_flat")
        scaled = conformally_rescaled(spec, "0.2*x")
        pt = [0.5, 0.1, 0.2, 0.3]
        g = scaled.metric_point(pt, 0).g
        assert np.abs(g - np.exp(0.1) * np.eye(4)).max() < 1e-14


class TestConfigFiles:
    def test_round_trip_euclidean(self, tmp_path, catalog):
        spec = catalog["euclidean_flat"]
        path = tmp_path / "euclid.cfg"
        path.write_text(spec_to_config(spec))
        loaded = load_manifold_config(str(path))
        assert loaded.id == spec.id
        assert loaded.coords == spec.coords
        assert loaded.metric_exprs == spec.metric_exprs
        assert loaded.j_exprs == spec.j_exprs
        assert loaded.tags == spec.tags
        assert loaded.domain == spec.domain
        # same residuals through the engine
        rep_a = run_suite(spec, 3, seed=3, identities=["EQ42", "EQ82"])
        rep_b = run_suite(loaded, 3, seed=3, identities=["EQ42", "EQ82"])
        assert [r["max_rel_residual"] for r in rep_a.identities] == [
            r["max_rel_residual"] for r in rep_b.identities
        ]

    def test_parse_error_with_offset(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(
            "[manifold]\nid = bad\ncoords = x, y, z, t\n"
            "domain = -1..1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = x +\ng_22 = 1\ng_33 = 1\ng_44 = 1\n"
        )
        with pytest.raises(CatalogError, match="offset 3"):
            load_manifold_config(str(path))

    def test_j_square_violation_lists_worst_point(self, tmp_path):
        path = tmp_path / "badj.cfg"
        path.write_text(
            "[manifold]\nid = badj\ncoords = x, y, z, t\n"
            "domain = -1..1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = 1\ng_22 = 1\ng_33 = 1\ng_44 = 1\n"
            "[structure]\nJ_1_2 = -2\nJ_2_1 = 2\nJ_3_4 = -1\nJ_4_3 = 1\n"
        )
        with pytest.raises(CatalogError) as exc:
            load_manifold_config(str(path))
        msg = str(exc.value)
        assert "J^2 != -1" in msg and "at [" in msg

    def test_wrong_dimension(self, tmp_path):
        path = tmp_path / "dim.cfg"
        path.write_text(
            "[manifold]\nid = dim\ncoords = x, y, z\n"
            "domain = -1..1, -1..1, -1..1\n[metric]\ng_11 = 1\n"
        )
        with pytest.raises(CatalogError, match="4 coordinates"):
            load_manifold_config(str(path))

    def test_missing_diagonal(self, tmp_path):
        path = tmp_path / "md.cfg"
        path.write_text(
            "[manifold]\nid = md\ncoords = x, y, z, t\n"
            "domain = -1..1, -1..1, -1..1, -1..1\n[metric]\ng_11 = 1\ng_22 = 1\ng_33 = 1\n"
        )
        with pytest.raises(CatalogError, match="g_44"):
            load_manifold_config(str(path))

    def test_bad_domain(self, tmp_path):
        path = tmp_path / "dom.cfg"
        path.write_text(
            "[manifold]\nid = dom\ncoords = x, y, z, t\ndomain = 1..-1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = 1\ng_22 = 1\ng_33 = 1\ng_44 = 1\n"
        )
        with pytest.raises(CatalogError, match="empty domain"):
            load_manifold_config(str(path))

    def test_unknown_tag(self, tmp_path):
        path = tmp_path / "tag.cfg"
        path.write_text(
            "[manifold]\nid = t\ncoords = x, y, z, t\ndomain = -1..1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = 1\ng_22 = 1\ng_33 = 1\ng_44 = 1\n[tags]\ntags = shiny\n"
        )
        with pytest.raises(CatalogError, match="shiny"):
            load_manifold_config(str(path))

    def test_symmetric_entries_textually_different_numerically_equal(self, tmp_path):
        path = tmp_path / "sym.cfg"
        path.write_text(
            "[manifold]\nid = s\ncoords = x, y, z, t\ndomain = -1..1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = 1\ng_22 = 1\ng_33 = 1\ng_44 = 1\ng_12 = x*y\ng_21 = y*x\n"
        )
        spec = load_manifold_config(str(path))
        assert spec.id == "s"

    def test_symmetric_conflict_rejected(self, tmp_path):
        path = tmp_path / "conflict.cfg"
        path.write_text(
            "[manifold]\nid = c\ncoords = x, y, z, t\ndomain = -1..1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = 4\ng_22 = 4\ng_33 = 4\ng_44 = 4\ng_12 = 0.5*x\ng_21 = 0.5*y\n"
        )
        with pytest.raises(CatalogError, match="differ"):
            load_manifold_config(str(path))

    def test_non_spd_rejected(self, tmp_path):
        path = tmp_path / "spd.cfg"
        path.write_text(
            "[manifold]\nid = spd\ncoords = x, y, z, t\ndomain = -1..1, -1..1, -1..1, -1..1\n"
            "[metric]\ng_11 = -1\ng_22 = 1\ng_33 = 1\ng_44 = 1\n"
        )
        with pytest.raises(CatalogError, match="positive definite"):
            load_manifold_config(str(path))


class TestTags:
    def test_normalize(self):
        assert normalize_tag("Kähler") == "kahler"
        assert normalize_tag(" almost-Kähler ") == "almost-kahler"
        assert normalize_tag("constant-S") == "constant-s"
