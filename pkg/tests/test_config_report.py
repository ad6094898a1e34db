import copy
import json
import math

import pytest

from chiralhom.config import (
    DEFAULTS,
    SCHEMA,
    ConfigError,
    build_laminate_spec,
    build_table,
    eps_list,
    load,
    validate,
)
from chiralhom.report import Check, RunReport, atomic_via, atomic_write_text, check_passes, recheck, write_csv, write_json


def test_example_config_loads(raw_config):
    cfg = validate(raw_config)
    assert cfg["helix"]["n_cells"] == DEFAULTS["helix"]["n_cells"]
    t = build_table(cfg)
    assert len(t) == 2 and t.phases[1].kappa == -1.0
    assert build_laminate_spec(cfg).widths == (1.0, 1.0)
    assert eps_list(cfg) == [8.0, 4.0, 2.0, 1.0, 0.5]


def test_defaults_do_not_leak(raw_config):
    cfg = validate(raw_config)
    cfg["helix"]["n_cells"] = 3
    assert DEFAULTS["helix"]["n_cells"] == 512


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda c: c.update(probabilities=[0.5, 0.4]), "sum"),
        (lambda c: c.update(probabilities=[1.0]), "probabilities"),
        (lambda c: c["phases"][0].update(a=-1.0), "schema"),
        (lambda c: c.update(bogus=1), "schema"),
        (lambda c: c.update(seeds=[1, 1]), "distinct"),
        (lambda c: c.update(laminate={"widths": [1.0]}), "widths"),
        (lambda c: c.update(gamma_sweep={"exponents": [4, 3]}), "increasing"),
        (lambda c: c.update(gamma_sweep={"eps": [1.0, 2.0]}), "decreasing"),
        (lambda c: c.update(birkhoff={"windows": [10, 5]}), "increasing"),
        (lambda c: c["phases"][0].update(easy_axis=[1.0, 1.0, 0.0]), "phase"),
        (lambda c: c.update(version=2), "schema"),
    ],
)
def test_invalid_configs(raw_config, mutate, match):
    raw = copy.deepcopy(raw_config)
    mutate(raw)
    with pytest.raises(ConfigError, match=match):
        validate(raw)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text("[]")
    with pytest.raises(ConfigError):
        load(tmp_path / "list.json")


def test_schema_is_documented():
    assert SCHEMA["additionalProperties"] is False
    assert set(DEFAULTS) <= set(SCHEMA["properties"])


@pytest.mark.parametrize(
    "kind, value, target, tol, ok",
    [
        ("le", 1.0, None, 1.0, True),
        ("le", 1.1, None, 1.0, False),
        ("le", math.nan, None, 1.0, False),
        ("le", None, None, 1.0, False),
        ("rel_err", 1.01, 1.0, 0.02, True),
        ("rel_err", 0.97, 1.0, 0.02, False),
        ("abs_err", -0.01, 0.0, 0.02, True),
        ("true", True, None, None, True),
        ("true", False, None, None, False),
    ],
)
def test_check_rule(kind, value, target, tol, ok):
    assert check_passes(kind, value, target, tol) is ok
    assert Check("c", value, "f", kind, tol, target).passed is ok


def test_check_kind_validated():
    with pytest.raises(ValueError):
        Check("c", 1.0, "f", "approx", 1.0)
    with pytest.raises(ValueError):
        check_passes("approx", 1.0, None, 1.0)


def test_report_roundtrip(tmp_path):
    import numpy as np

    rep = RunReport("demo", {"x": 1})
    rep.check("a", np.float64(0.5), "x <= 1", "le", 1.0)
    rep.check("b", 2.0, "x ~ 2", "rel_err", 0.1, 2.0)
    rep.metrics["arr"] = np.arange(3.0)
    write_json(tmp_path / "r.json", rep.to_dict())
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["pass"] is True and recheck(d)
    assert d["metrics"]["arr"] == [0.0, 1.0, 2.0]
    assert all("formula" in c and "tol" in c for c in d["checks"])
    d["checks"][0]["value"] = 3.0
    assert not recheck(d)
    assert rep.summary_lines()[0].startswith("[PASS] a")


def test_full_precision_output(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "x.csv", ["v"], [[x]])
    assert float((tmp_path / "x.csv").read_text().splitlines()[1]) == x
    write_json(tmp_path / "x.json", {"v": x})
    assert json.loads((tmp_path / "x.json").read_text())["v"] == x


def test_atomic_writes_leave_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "sub" / "a.txt", "hi")
    assert (tmp_path / "sub" / "a.txt").read_text() == "hi"

    def boom(path):
        raise RuntimeError("fail")

    with pytest.raises(RuntimeError):
        atomic_via(tmp_path / "sub" / "b.bin", boom)
    assert sorted(p.name for p in (tmp_path / "sub").iterdir()) == ["a.txt"]


def test_example_copy_matches_canonical_config():
    from conftest import ROOT, TWO_PHASE_CONFIG

    assert (ROOT / "examples" / "two_phase.json").read_text() == TWO_PHASE_CONFIG.read_text()
