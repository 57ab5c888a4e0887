import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from weakflow.cli import run
from weakflow.config import load_config
from weakflow.grid import GridSpec
from weakflow.picard import SolverConfig, estimate_constants, picard_solve, prepare_in_regime, smallness_report
from weakflow.problem import well_prepared_data

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@dataclass
class Solved:
    grid: GridSpec
    raw: object
    data: object
    constants: object
    smallness: object
    u: object
    theta: object
    trace: object


@pytest.fixture(scope="session")
def golden():
    """Full model at N = 32 with δ = ε_emp/2 (constants from 100 probes, seed 7)."""
    g = GridSpec(2 * math.pi, 32)
    raw = well_prepared_data(g, 42, [1, 3], 1.0)
    c = estimate_constants(g, 100, 7, gravity=raw.gravity)
    data = prepare_in_regime(raw, c, 0.5)
    rep = smallness_report(data, c)
    u, th, tr = picard_solve(data, SolverConfig(), c)
    return Solved(g, raw, data, c, rep, u, th, tr)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(2 * math.pi, 16)


def run_scenario(config_name, scenario, out, **overrides):
    cfg = load_config(CONFIGS / config_name)
    if overrides:
        cfg = cfg.model_copy(update=overrides)
    code = run(cfg, scenario, out)
    return code, out


def read_json(path):
    return json.loads(Path(path).read_text())


@pytest.fixture(scope="session")
def toy_runs(tmp_path_factory):
    """Golden toy-model asymptotics runs: the base radii band and the band moved outward 2x."""
    base = tmp_path_factory.mktemp("toy_base")
    outer = tmp_path_factory.mktemp("toy_outer")
    code_a, _ = run_scenario("golden_toy.json", "asymptotics", base)
    code_b, _ = run_scenario("golden_toy_outer.json", "asymptotics", outer)
    return {"base": (code_a, base), "outer": (code_b, outer)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance summary -----------------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        prev = _ACCEPTANCE.get(name)
        if prev is None or prev == "passed":
            _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        outcome = _ACCEPTANCE[name]
        tag = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"{tag}  {name}")
