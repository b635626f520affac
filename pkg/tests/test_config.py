from dataclasses import fields

import numpy as np
import pytest

from swapqoc.config import CONFIG_FIELDS, SCHEMA, ConfigError, RunConfig, load_config, parse_config
from swapqoc.grape import FULL_GATE, MERGE, MERGE_CASCADE, OptimizationProblem


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = load_config(p, env={})
    assert cfg == RunConfig()
    assert load_config(None, env={}) == RunConfig()


def test_schema_defaults_match_dataclass():
    defaults = {f.name: f.default for f in fields(RunConfig)}
    flat = {k: d for keys in SCHEMA.values() for k, (_, d) in keys.items()}
    assert set(flat) == set(CONFIG_FIELDS)
    for key, value in flat.items():
        assert defaults[key] == value, key


def test_default_problem_matches_physical_defaults():
    p = RunConfig().problem()
    ref = OptimizationProblem.merge(0.12)
    assert p == ref
    assert p.cascade == MERGE_CASCADE
    assert p.weights.gamma == 1e-7 and p.weights.sigma == 1e5
    assert p.alpha_target == 0.33 and p.threshold == 0.99


def test_sections_and_overrides():
    text = """
[lattice]
a_s = 0
n = 32
[grape]
gamma = 1e-6   # stronger smoothing
cascade = 32:5e-4, 64:1e-4
stage_iterations = 100, 20
[run]
kind = full
durations = 0.1, 0.2
"""
    cfg = parse_config(text, env={})
    assert cfg.a_s == 0.0 and cfg.n == 32 and cfg.gamma == 1e-6
    assert cfg.durations == (0.1, 0.2)
    assert cfg.kind == FULL_GATE
    p = cfg.problem()
    assert p.lattice.a_s == 0.0
    assert [(s.n, s.dt, s.max_iterations) for s in p.cascade] == [(32, 5e-4, 100), (64, 1e-4, 20)]
    assert p.duration == 0.1


def test_zero_scattering_length_is_non_interacting():
    cfg = parse_config("a_s = 0\n", env={})
    from swapqoc.lattice import GridPotential

    gp = GridPotential(cfg.lattice().grid(32), cfg.lattice())
    assert np.all(gp.coupling(0.0, -1.489, 2 * np.pi * 122) == 0.0)


def test_section_less_text_is_accepted():
    cfg = parse_config("seeds = 4\nrng = 9\n", env={})
    assert cfg.seeds == 4 and cfg.rng == 9


def test_malformed_number_names_key_and_line():
    with pytest.raises(ConfigError, match=r"'a'.*line 3"):
        parse_config("[lattice]\nn = 64\na = 0.4o8\n", env={})


def test_unknown_key_rejected_with_hint():
    with pytest.raises(ConfigError, match=r"unknown key 'gama'.*line 2"):
        parse_config("[grape]\ngama = 1\n", env={})
    with pytest.raises(ConfigError, match=r"did you mean section \[grape\]"):
        parse_config("[run]\ngamma = 1\n", env={})
    with pytest.raises(ConfigError, match=r"unknown key 'seed'.*line 1"):
        parse_config("seed = 3\n", env={})
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[physics]\na = 1\n", env={})


def test_bad_enumerations():
    for text in ("kind = swap\n", "[lattice]\nconfiguration = joined\n", "[adiabatic]\nmode = slow\n", "seeds = 0\n",
                 "[grape]\nlower = 0, 1\n", "durations = -1\n"):
        with pytest.raises(ConfigError):
            parse_config(text, env={})


def test_environment_override():
    cfg = parse_config("seeds = 4\n", env={"SWAPQOC_SEEDS": "7", "SWAPQOC_A_S": "0", "HOME": "/x"})
    assert cfg.seeds == 7 and cfg.a_s == 0.0
    with pytest.raises(ConfigError, match="SWAPQOC_NOPE"):
        parse_config("", env={"SWAPQOC_NOPE": "1"})
    with pytest.raises(ConfigError, match="environment"):
        parse_config("", env={"SWAPQOC_N": "many"})


def test_echo_round_trip(tmp_path):
    cfg = parse_config("[grape]\ncascade = 32:5e-4\nseed_sines = 45\nlower = -inf, 0, 0.3\n", env={})
    path = cfg.write_echo(tmp_path)
    assert path.name == "resolved_config.ini"
    assert load_config(path, env={}) == cfg
    assert load_config(RunConfig().write_echo(tmp_path / "d"), env={}) == RunConfig()


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/file.cfg", env={})


def test_kind_aliases():
    assert parse_config("kind = full_gate\n", env={}).kind == FULL_GATE
    assert parse_config("kind = Merge\n", env={}).kind == MERGE
