import pytest

from srpfmc.config import SCHEMA, build_config, defaults_text, parse_config, parse_text, suggest
from srpfmc.errors import ConfigError


def test_parse_text_values_and_comments():
    raw = parse_text("""
        # comment
        model.m = 0.5          # trailing comment
        potential.kind = harmonic
        run.t_grid = [1, 2, 4]
        run.moments = True
    """)
    assert raw == {"model.m": 0.5, "potential.kind": "harmonic", "run.t_grid": [1, 2, 4], "run.moments": True}


def test_defaults_roundtrip():
    cfg = parse_config(defaults_text(), env={})
    assert cfg.values == build_config({}, env={}).values
    assert set(cfg.values) == set(SCHEMA)


def test_seed_precedence():
    assert build_config({}, env={}).seed == 1
    assert build_config({}, env={"SRPFMC_SEED": "77"}).seed == 77
    assert build_config({"sampling.master_seed": 5}, env={"SRPFMC_SEED": "77"}).seed == 5


def test_all_violations_reported_together():
    with pytest.raises(ConfigError) as exc:
        build_config({"model.m": -1.0, "sampling.n_samples": 1, "modle.mass": 3}, env={})
    keys = [k for k, _ in exc.value.violations]
    assert keys == ["modle.mass", "model.m", "sampling.n_samples"]
    assert "did you mean model.m" in str(exc.value)
    assert exc.value.code == "schema_violation"


def test_cross_field_checks():
    with pytest.raises(ConfigError, match="brownian_time_cap"):
        build_config({"model.m": 0.0}, env={})
    with pytest.raises(ConfigError, match="needs d = 3"):
        build_config({"model.d": 1, "model.alpha": 0.2}, env={})
    cfg = build_config({"model.m": 0.0, "paths.brownian_time_cap": 1e9}, env={})
    assert cfg.paths.brownian_time_cap == 1e9


def test_digest_tracks_values():
    a = build_config({}, env={})
    assert a.digest() == build_config({}, env={}).digest()
    assert a.digest() != a.with_values(**{"model.m": 2.0}).digest()
    assert len(a.digest()) == 16


def test_suggestions():
    assert suggest("model.mass") == "model.m"
    assert suggest("sampling.seed") == "sampling.master_seed"
    assert suggest("zzz.qqq") is None


def test_user_table_loaded(tmp_path):
    (tmp_path / "v.txt").write_text("-1 1\n0 0\n1 1\n")
    cfg = build_config({"model.d": 1, "potential.kind": "user_table", "potential.table": str(tmp_path / "v.txt")}, env={})
    assert cfg.model.potential.table_v == (1.0, 0.0, 1.0)
    with pytest.raises(ConfigError, match="potential.table"):
        build_config({"potential.kind": "user_table", "potential.table": str(tmp_path / "missing")}, env={})
