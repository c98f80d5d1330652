import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mosquito_evo import cli
from mosquito_evo import config as cfgmod
from mosquito_evo import dynamics as dyn
from mosquito_evo.errors import ParseError, ValidationError
from mosquito_evo.report import dumps

RAW_TEXT = "\n".join(
    f"{f} = {getattr(dyn.BASELINE_RAW, f)!r}" for f in dyn.BASELINE_RAW.__dataclass_fields__)


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- parsing --------------------------------------------------------------------------


def test_baseline_config_round_trip():
    cfg = cfgmod.baseline_config()
    assert cfg.params == dyn.BASELINE
    assert cfg.seed == cfgmod.DEFAULT_SEED
    assert not np.any(cfg.initial)


def test_loose_keys_routed_by_name():
    text = cfgmod.BASELINE_CONFIG.replace("[parameters]\n", "") + "steps = 5\nE = 2.5\n"
    cfg = cfgmod.parse_text(text)
    assert cfg.steps == 5 and cfg.initial[0] == 2.5
    assert cfg.params == dyn.BASELINE


def test_raw_block_condensed():
    cfg = cfgmod.parse_text("[raw]\n" + RAW_TEXT)
    assert cfg.raw is not None
    assert cfg.params.e_hat == pytest.approx(1.06, abs=1e-14)


def test_bare_b_with_raw_keys_goes_to_raw():
    cfg = cfgmod.parse_text(RAW_TEXT)
    assert cfg.raw is not None and cfg.raw.b == dyn.BASELINE_RAW.b


def test_comments_and_blank_lines():
    text = "# header\n\n" + cfgmod.BASELINE_CONFIG.replace("b = 100", "b = 100   # eggs")
    assert cfgmod.parse_text(text).params.b == 100.0


@pytest.mark.parametrize("text,line", [
    ("[parameters]\nbogus = 1\n", 2),
    ("[nowhere]\n", 1),
    ("[parameters\n", 1),
    ("[parameters]\nb 100\n", 2),
    ("[parameters]\nb = 1\nb = 2\n", 3),
    ("[parameters]\nb = abc\n", 2),
    ("[parameters]\nb = nan\n", 2),
    ("frobnicate = 3\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        cfgmod.parse_text(text)
    assert info.value.line == line


def test_both_blocks_rejected():
    with pytest.raises(ValidationError):
        cfgmod.parse_text(cfgmod.BASELINE_CONFIG + "[raw]\n" + RAW_TEXT)


def test_no_block_rejected():
    with pytest.raises(ValidationError):
        cfgmod.parse_text("[run]\nsteps = 3\n")


def test_missing_key_listed():
    text = cfgmod.BASELINE_CONFIG.replace("theta_hat = 3.41\n", "")
    with pytest.raises(ValidationError) as info:
        cfgmod.parse_text(text)
    assert any("theta_hat" in p for p in info.value.problems)


def test_hard_violation_rejected():
    with pytest.raises(ValidationError):
        cfgmod.parse_text(cfgmod.BASELINE_CONFIG.replace("b = 100", "b = -1"))


def test_out_of_range_is_only_a_warning():
    cfg = cfgmod.parse_text(cfgmod.BASELINE_CONFIG.replace("e_hat = 1.06", "e_hat = 9.5"))
    assert cfg.params.range_warnings()


@pytest.mark.parametrize("run_text,problem", [
    ("steps = -1", "steps"), ("tol = 0", "tol"), ("dt = 0", "dt"), ("period = 0", "period"),
    ("epsilon = sideways", "epsilon"),
])
def test_run_validation(run_text, problem):
    with pytest.raises(ValidationError) as info:
        cfgmod.parse_text(cfgmod.BASELINE_CONFIG + "[run]\n" + run_text + "\n")
    assert any(problem in p for p in info.value.problems)


def test_integer_keys_reject_fractions():
    with pytest.raises(ParseError):
        cfgmod.parse_text(cfgmod.BASELINE_CONFIG + "[run]\nsteps = 2.5\n")


def test_sweep_lists():
    cfg = cfgmod.parse_text(cfgmod.BASELINE_CONFIG + "[sweep]\nb = 50, 100, 150\ne = 0.4,0.5,0.6\n")
    assert cfg.sweep == [{"b": 50.0, "e": 0.4}, {"b": 100.0, "e": 0.5}, {"b": 150.0, "e": 0.6}]
    with pytest.raises(ValidationError):
        cfgmod.parse_text(cfgmod.BASELINE_CONFIG + "[sweep]\nb = 1, 2\ne = 0.5\n")
    with pytest.raises(ValidationError):
        cfgmod.parse_text(cfgmod.BASELINE_CONFIG + "[sweep]\nb = 1, -2\n")


def test_parse_epsilon():
    assert cfgmod.parse_epsilon("ZERO") == "zero"
    assert cfgmod.parse_epsilon("lstar") == "lstar"
    assert cfgmod.parse_epsilon("12.5") == 12.5
    with pytest.raises(ValueError):
        cfgmod.parse_epsilon("inf")


def test_missing_file():
    with pytest.raises(ParseError):
        cfgmod.parse_config("/nonexistent/run.cfg")


# --- serialisation --------------------------------------------------------------------


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dumps_round_trips_floats(x):
    assert json.loads(dumps({"x": x}))["x"] == x


def test_dumps_special_values():
    d = json.loads(dumps({"nan": math.nan, "z": 1 + 2j, "s": {3, 1, 2}, "a": np.arange(3)}))
    assert d["nan"] is None
    assert d["z"] == {"re": 1.0, "im": 2.0}
    assert d["s"] == [1, 2, 3]
    assert d["a"] == [0, 1, 2]


# --- command line ---------------------------------------------------------------------


def test_simulate_origin(capsys):
    code, out, _ = run(capsys, "simulate")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,E,L,P,H,R,O"
    assert len(lines) == 12
    assert all(line.split(",")[1:] == ["0"] * 6 for line in lines[1:])


def test_simulate_steps_and_out(tmp_path, capsys):
    out_path = tmp_path / "orbit.csv"
    path = write_cfg(tmp_path, cfgmod.BASELINE_CONFIG + "[initial]\nE = 1\n")
    code, out, err = run(capsys, "simulate", "--config", path, "--steps", "3",
                         "--out", str(out_path))
    assert code == 0 and out == ""
    assert len(out_path.read_text().splitlines()) == 5
    assert "cone" in err


def test_simulate_overflow_exit(tmp_path, capsys):
    path = write_cfg(tmp_path, cfgmod.BASELINE_CONFIG + "[initial]\nL = 1e6\n")
    code, out, err = run(capsys, "simulate", "--config", path, "--steps", "200")
    assert code == 1
    assert json.loads(err)["error"]["type"] == "Overflow"
    assert out.startswith("n,E,L,P,H,R,O")


def test_ode_runs(capsys):
    code, out, _ = run(capsys, "ode", "--steps", "5")
    assert code == 0 and len(out.splitlines()) == 7


def test_classify_origin(capsys):
    code, out, _ = run(capsys, "classify")
    assert code == 0
    res = json.loads(out)["results"]
    assert res["kind"] == "Saddle" and res["stable_dim"] == 2 and res["unstable_dim"] == 4


def test_classify_non_fixed_point(tmp_path, capsys):
    path = write_cfg(tmp_path, cfgmod.BASELINE_CONFIG + "[initial]\nE = 1\n")
    code, _, err = run(capsys, "classify", "--config", path)
    assert code == 1
    assert json.loads(err)["error"]["type"] == "NotAFixedPoint"


def test_fixed_points_report(capsys):
    code, out, _ = run(capsys, "fixed-points")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1 and doc["command"] == "fixed-points"
    fps = doc["results"]["fixed_points"]
    assert len(fps) == 2
    assert fps[1]["point"][1] == pytest.approx(115.48864584922859, rel=1e-10)


def test_idempotents_report(capsys):
    code, out, _ = run(capsys, "idempotents")
    assert code == 0
    sols = json.loads(out)["results"]["idempotents"]
    assert len(sols) == 4 and sols[0]["method"] == "Trivial"


def test_algebra_report_at_lstar(capsys):
    code, out, _ = run(capsys, "algebra", "--epsilon", "lstar")
    assert code == 0
    res = json.loads(out)["results"]
    assert res["epsilon"] == pytest.approx(115.48864584922859, rel=1e-10)
    assert res["simple"]["verdict"] is True
    assert res["absolute_nilpotents"]["elements"] == [[0.0] * 6]


def test_operator_report(capsys):
    code, out, _ = run(capsys, "operator")
    assert code == 0
    res = json.loads(out)["results"]
    assert res["one_in_spectrum"] is False
    assert res["limit"]["exists"] is False


def test_outputs_are_byte_identical(capsys):
    for cmd in ("simulate", "fixed-points", "idempotents"):
        first = run(capsys, cmd)[1]
        assert run(capsys, cmd)[1] == first


def test_config_error_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, "[parameters]\nbogus = 1\n")
    code, out, err = run(capsys, "classify", "--config", path)
    assert code == 2 and out == ""
    e = json.loads(err)["error"]
    assert e["category"] == "config" and e["line"] == 2


def test_bad_epsilon_exit_code(capsys):
    assert run(capsys, "algebra", "--epsilon", "sideways")[0] == 2


def test_sweep_report(tmp_path, capsys):
    path = write_cfg(tmp_path, cfgmod.BASELINE_CONFIG + "[sweep]\nb = 50, 100\n")
    code, out, _ = run(capsys, "fixed-points", "--config", path)
    assert code == 0
    runs = json.loads(out)["results"]["sweep"]
    assert [r["overrides"]["b"] for r in runs] == [50.0, 100.0]


def test_sweep_rejected_for_csv(tmp_path, capsys):
    path = write_cfg(tmp_path, cfgmod.BASELINE_CONFIG + "[sweep]\nb = 50, 100\n")
    assert run(capsys, "simulate", "--config", path)[0] == 2
