import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_field
from fracsqg.config import (ConfigError, ExperimentConfig, apply_overrides, config_hash,
                            dump_config, from_dict, load_config)
from fracsqg.io import (CsvSink, SnapshotError, dump_json, read_csv, read_snapshot,
                        write_snapshot)

DEFAULT_YAML = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"


class TestLoad:
    def test_minimal(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("solver:\n  n: 32\n  gamma: 0.8\n  t_end: 0.1\n")
        cfg = load_config(p)
        assert cfg.solver.n == 32 and cfg.solver.gamma == 0.8
        assert cfg.datum == ExperimentConfig().datum

    def test_default_file(self):
        cfg = load_config(DEFAULT_YAML)
        assert cfg.solver.n == 64 and cfg.datum.kind == "random_spectrum"

    def test_gamma_out_of_range(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("solver:\n  gamma: 1.5\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert "gamma 1.5 out of [gamma0=0.05, 1]" in str(err.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as err:
            from_dict({"solver": {"nn": 32}, "extra": 1})
        assert "solver.nn: unknown key" in err.value.problems
        assert "extra: unknown key" in err.value.problems

    def test_collects_all_problems(self):
        with pytest.raises(ConfigError) as err:
            from_dict({"solver": {"n": 24, "gamma": 2.0}, "probes": [{"alpha": 1.5}]})
        assert len(err.value.problems) >= 3

    def test_wrong_type(self):
        with pytest.raises(ConfigError) as err:
            from_dict({"solver": {"n": "big"}})
        assert "expected an integer" in str(err.value)

    def test_yaml_error_has_position(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("solver:\n  n: [32\n  gamma: 0.8\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert "line" in str(err.value) and "column" in str(err.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")


class TestRoundTrip:
    def test_dump_load(self, tmp_path):
        cfg = load_config(DEFAULT_YAML)
        p = tmp_path / "c.yaml"
        p.write_text(dump_config(cfg))
        assert load_config(p) == cfg
        assert config_hash(load_config(p)) == config_hash(cfg)

    @given(n=st.sampled_from([16, 32, 64]), gamma=st.floats(0.05, 1.0),
           seed=st.integers(0, 2**63), amp=st.floats(0.1, 10.0))
    def test_property(self, n, gamma, seed, amp):
        import yaml

        cfg = from_dict({"solver": {"n": n, "gamma": gamma}, "seed": seed,
                         "datum": {"kind": "random_spectrum", "amplitude": amp, "k_max": 3}})
        assert from_dict(yaml.safe_load(dump_config(cfg))) == cfg


class TestOverrides:
    def test_nested(self):
        cfg = apply_overrides(ExperimentConfig(), ["solver.gamma=0.6", "probes.0.alpha=0.3"])
        assert cfg.solver.gamma == 0.6 and cfg.probes[0].alpha == 0.3

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), ["solver.bogus=1"])

    def test_not_key_value(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), ["solver.gamma"])

    def test_revalidates(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), ["solver.gamma=1.5"])

    def test_hash_changes(self):
        a = ExperimentConfig()
        assert config_hash(a) != config_hash(apply_overrides(a, ["seed=1"]))


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        f = random_field(32, 3)
        write_snapshot(tmp_path / "s.sqgf", f, 0.8, 0.25)
        g, gamma, t = read_snapshot(tmp_path / "s.sqgf")
        assert np.array_equal(g.values, f.values) and gamma == 0.8 and t == 0.25

    def test_layout(self, tmp_path):
        f = random_field(16, 1)
        write_snapshot(tmp_path / "s.sqgf", f, 0.5, 1.0)
        raw = (tmp_path / "s.sqgf").read_bytes()
        assert raw[:4] == b"SQGF" and len(raw) == 4 + 4 + 4 + 8 + 8 + 8 * 256
        assert int.from_bytes(raw[8:12], "little") == 16

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "s.sqgf"
        write_snapshot(p, random_field(16, 1), 0.5, 0.0)
        p.write_bytes(b"XXXX" + p.read_bytes()[4:])
        with pytest.raises(SnapshotError, match="magic"):
            read_snapshot(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "s.sqgf"
        write_snapshot(p, random_field(16, 1), 0.5, 0.0)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(SnapshotError):
            read_snapshot(p)


class TestCsv:
    def test_rows_visible_before_close(self, tmp_path):
        p = tmp_path / "d.csv"
        sink = CsvSink(p, ["t", "x"])
        sink.write(["0", "1.5"])
        assert p.read_text() == "t,x\n0,1.5\n"
        sink.close()
        assert read_csv(p)["x"].tolist() == [1.5]


class TestJson:
    def test_nonfinite_become_null(self):
        import json

        out = json.loads(dump_json({"a": math.inf, "b": [math.nan, 1.0], "c": np.float64(2.0)}))
        assert out == {"a": None, "b": [None, 1.0], "c": 2.0}

    def test_deterministic(self):
        assert dump_json({"b": 1, "a": 2}) == dump_json({"a": 2, "b": 1})
