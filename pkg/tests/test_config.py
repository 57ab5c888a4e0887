import json
import math

import pytest
from pydantic import ValidationError

from weakflow.config import SCENARIOS, ScenarioConfig, load_config

from conftest import CONFIGS

BASE = {"grid": {"N": 16, "L": 6.0}, "data": {"seed": 1, "band": [1, 4], "amplitude": 1.0, "toy_mode": False}}


def test_minimal_config_defaults():
    cfg = ScenarioConfig.model_validate(BASE)
    assert cfg.solver.max_iterations == 200
    assert cfg.solver.p_list[-1] == math.inf
    assert cfg.constants.probe_count == 100
    assert cfg.liouville.q == math.inf


@pytest.mark.parametrize(
    "patch",
    [
        {"grid": {"N": 16, "L": 6.0, "extra": 1}},
        {"grid": {"N": 15, "L": 6.0}},
        {"grid": {"N": 16, "L": 0.0}},
        {"data": {"seed": 1, "band": [1, 4], "amplitude": 1.0}},
        {"data": {"seed": 1, "band": [1, 6], "amplitude": 1.0, "toy_mode": False}},
        {"data": {"seed": 1, "band": [0.5, 4], "amplitude": 1.0, "toy_mode": False}},
        {"data": {"seed": 1, "band": [1, 4], "amplitude": -1.0, "toy_mode": False}},
        {"scenario": "unknown"},
        {"bogus": True},
        {"liouville": {"radius_fractions": [0.75]}},
        {"flow": {"p": 3.0}},
        {"asymptotics": {"span": [0.1, 2.0]}},
    ],
)
def test_strict_schema(patch):
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate({**BASE, **patch})


def test_grid_has_no_default():
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate({"data": BASE["data"]})


def test_roundtrip_with_infinity(tmp_path):
    cfg = ScenarioConfig.model_validate({**BASE, "solver": {"p_list": [4, "inf"]}})
    p = tmp_path / "c.json"
    p.write_text(cfg.model_dump_json())
    back = load_config(p)
    assert back == cfg
    assert back.solver.p_list == (4.0, math.inf)
    assert json.loads(p.read_text())["solver"]["p_list"][1] == "Infinity"


def test_with_seed_and_frozen():
    cfg = ScenarioConfig.model_validate(BASE)
    assert cfg.with_seed(9).data.seed == 9 and cfg.data.seed == 1
    with pytest.raises(ValidationError):
        cfg.data.seed = 3


RUN_CONFIGS = sorted(p for p in CONFIGS.glob("*.json") if not p.name.endswith("_tolerances.json"))


@pytest.mark.parametrize("path", RUN_CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.scenario is None or cfg.scenario in SCENARIOS
