import copy
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spingrape import load_config
from spingrape.config import ConfigError, config_from_dict

GOOD = {
    "system": {
        "spins": [
            {"name": "C1", "channel": "carbon", "offset_hz": 541.7, "weight": 1.0,
             "t1_s": 29.2, "t2star_s": 0.23},
            {"name": "C2", "channel": "carbon", "offset_hz": -541.7, "weight": 1.0,
             "t1_s": 17.3, "t2star_s": 0.44},
            {"name": "H", "channel": "hydrogen", "offset_hz": 0.0, "weight": 4.0,
             "t1_s": 2.67, "t2star_s": 0.20},
        ],
        "couplings": [
            {"a": "H", "b": "C2", "j_hz": 200.8},
            {"a": "C1", "b": "C2", "j_hz": 103.1},
            {"a": "C1", "b": "H", "j_hz": 9.0},
        ],
        "channels": [
            {"name": "carbon", "max_rf_hz": 2000.0},
            {"name": "hydrogen", "max_rf_hz": 2000.0},
        ],
    },
    "problem": {
        "initial_state": "Iz(C1)+Iz(C2)+4*Iz(H)",
        "target_state": "Iz(C1)+4*Iz(C2)+Iz(H)",
        "duration_s": 0.006,
        "steps": 1000,
    },
    "options": {"max_iters": 2000, "target_fidelity": 0.99},
    "seeds": [0, 1, 2, 3, 4],
    "acquisition": {"dwell_s": 0.0002, "points": 8192, "zero_fill": 2},
}


class TestLoadConfig:
    def test_example_configs_load(self):
        for name in ("tce_pe", "tce_comp"):
            cfg = load_config(f"configs/{name}.json")
            assert cfg.problem.steps == 1000
            assert cfg.problem.dt_s > 0
            assert len(cfg.seeds) == 5

    def test_good_dict(self):
        cfg = config_from_dict(copy.deepcopy(GOOD))
        assert cfg.system.n_spins == 3
        assert cfg.problem.duration_s == 0.006
        assert np.allclose(2 * np.real(np.diag(cfg.problem.rho0.entries)),
                           [6, -2, 4, -4, 4, -4, 2, -6])
        assert cfg.options.target_fidelity == 0.99
        assert cfg.acquisition.points == 8192

    def test_default_ensemble_is_robust(self):
        cfg = config_from_dict(copy.deepcopy(GOOD))
        scales = sorted(m.rf_scale["carbon"] for m in cfg.problem.ensemble)
        assert scales == [0.95, 1.0, 1.05]

    def test_explicit_ensemble(self):
        d = copy.deepcopy(GOOD)
        d["problem"]["ensemble"] = [
            {"rf_scale": {"carbon": 0.9, "hydrogen": 0.9}, "weight": 0.5},
            {"rf_scale": {"carbon": 1.0, "hydrogen": 1.0}, "weight": 0.5},
        ]
        cfg = config_from_dict(d)
        assert len(cfg.problem.ensemble) == 2

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "invalid JSON" in str(err.value)


class TestErrorPaths:
    @pytest.mark.parametrize("mutate,expected", [
        (lambda d: d.pop("system"), "system"),
        (lambda d: d["system"].pop("spins"), "system.spins"),
        (lambda d: d["system"]["spins"][0].pop("name"), "system.spins[0].name"),
        (lambda d: d["system"]["spins"][1].update(offset_hz="x"),
         "system.spins[1].offset_hz"),
        (lambda d: d["system"]["couplings"][0].update(j_hz=None),
         "system.couplings[0].j_hz"),
        (lambda d: d["system"]["channels"][0].pop("max_rf_hz"),
         "system.channels[0].max_rf_hz"),
        (lambda d: d["problem"].pop("duration_s"), "problem.duration_s"),
        (lambda d: d["problem"].update(steps="many"), "problem.steps"),
        (lambda d: d["problem"].update(initial_state="Iz(Q)"),
         "problem.initial_state"),
        (lambda d: d["options"].update(max_iters=2.5), "options.max_iters"),
        (lambda d: d["seeds"].append("x"), "seeds[5]"),
        (lambda d: d["acquisition"].update(points="lots"), "acquisition.points"),
    ])
    def test_error_names_key_path(self, mutate, expected):
        d = copy.deepcopy(GOOD)
        mutate(d)
        with pytest.raises(ConfigError) as err:
            config_from_dict(d)
        assert expected in str(err.value)

    def test_non_traceless_state_rejected(self):
        d = copy.deepcopy(GOOD)
        d["problem"]["initial_state"] = "Iz(C1)*Iz(C1)"
        with pytest.raises(ConfigError) as err:
            config_from_dict(d)
        assert "problem.initial_state" in str(err.value)

    def test_bad_ensemble_weight_sum(self):
        d = copy.deepcopy(GOOD)
        d["problem"]["ensemble"] = [
            {"rf_scale": {"carbon": 1.0, "hydrogen": 1.0}, "weight": 0.7}]
        with pytest.raises(ConfigError):
            config_from_dict(d)

    def test_ensemble_unknown_channel(self):
        d = copy.deepcopy(GOOD)
        d["problem"]["ensemble"] = [
            {"rf_scale": {"xenon": 1.0}, "weight": 1.0}]
        with pytest.raises(ConfigError) as err:
            config_from_dict(d)
        assert "xenon" in str(err.value)

    scalar_junk = st.one_of(st.none(), st.booleans(), st.text(max_size=3),
                            st.lists(st.integers(), max_size=2))

    @given(st.sampled_from([
        ("system", "spins", 0, "offset_hz"),
        ("system", "spins", 1, "weight"),
        ("system", "spins", 2, "t2star_s"),
        ("system", "couplings", 1, "j_hz"),
        ("system", "channels", 1, "max_rf_hz"),
    ]), scalar_junk)
    def test_fuzzed_numeric_fields_name_path(self, where, junk):
        if isinstance(junk, (int, float)) and not isinstance(junk, bool):
            return
        section, key, idx, field = where
        d = copy.deepcopy(GOOD)
        d[section][key][idx][field] = junk
        with pytest.raises(ConfigError) as err:
            config_from_dict(d)
        assert f"{section}.{key}[{idx}].{field}" in str(err.value)

    @given(st.sampled_from(["initial_state", "target_state", "duration_s", "steps"]),
           scalar_junk)
    def test_fuzzed_problem_fields_name_path(self, field, junk):
        d = copy.deepcopy(GOOD)
        d["problem"][field] = junk
        try:
            config_from_dict(d)
        except ConfigError as err:
            assert f"problem.{field}" in str(err)
        else:
            # a numeric-typed junk value may be accepted only where legal
            assert field in ("duration_s", "steps") and isinstance(junk, (int, float))
