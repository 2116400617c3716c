import pytest

from psmatch import data, init, settings
from psmatch.cli import run
from psmatch.errors import BoundError, ExitStatus
from psmatch.operation import Operation
from psmatch.options import build_options


def report(text: str) -> dict:
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_bound(capsys):
    assert run(["bound", "--design", "1"]) == 0
    out = capsys.readouterr().out
    assert "2.4731" in out
    assert report(out)["design"] == "1"


def test_bound_design_two(capsys):
    assert run(["bound", "--design", "2"]) == 0
    assert "sigma_eff=2.863" in capsys.readouterr().out


def test_simulate_is_reproducible(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["simulate", "--design", "1", "--n", "512", "--reps", "50", "--seed", "7", "--quiet"]
    assert run(base + ["--output", str(first), "--threads", "1"]) == 0
    assert run(base + ["--output", str(second), "--threads", "2"]) == 0
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text().splitlines()
    assert lines[1].startswith("n,m,rmse")
    assert [line.split(",")[1] for line in lines[2:]] == ["1", "2", "4", "8", "16"]


def test_simulate_prints_table(tmp_path, capsys):
    target = tmp_path / "out.csv"
    assert run(["simulate", "--n", "64", "--reps", "3", "--threads", "1", "--output", str(target)]) == 0
    out = capsys.readouterr().out
    assert "RMSE" in out
    assert "sigma_eff = 2.4731" in out


def test_simulate_needs_output(capsys):
    assert run(["simulate", "--design", "1", "--reps", "2", "--quiet"]) == ExitStatus.USAGE
    assert "--output" in capsys.readouterr().err


def test_simulate_output_directory_missing(tmp_path):
    target = tmp_path / "missing" / "out.csv"
    code = run(["simulate", "--n", "64", "--reps", "2", "--threads", "1", "--quiet", "--output", str(target)])
    assert code == ExitStatus.MISSING_FILE
    assert not target.exists()


def test_estimate_t4(t4_csv, capsys):
    assert run(["estimate", "--input", str(t4_csv), "--m", "1", "--q", "2", "--l", "2", "--quiet"]) == 0
    values = report(capsys.readouterr().out)
    assert float(values["tau_hat"]) == pytest.approx(2.5)
    assert values["m"] == "1"
    assert float(values["ci_low"]) <= 2.5 <= float(values["ci_high"])
    assert values["ci"] == f"{values['ci_low']},{values['ci_high']}"
    assert "overlap_warnings" in values
    assert "unadjusted_ci_low" in values


def test_estimate_to_file(t4_csv, tmp_path, capsys):
    target = tmp_path / "report.txt"
    assert run(["estimate", "--input", str(t4_csv), "--m", "2", "--output", str(target), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    assert report(target.read_text())["tau_hat"] == "2.5"


def test_estimate_refuses_large_m(t4_csv, capsys):
    assert run(["estimate", "--input", str(t4_csv), "--m", "3"]) == ExitStatus.BOUND
    err = capsys.readouterr().err.strip()
    assert "m=3" in err
    assert len(err.splitlines()) == 1


def test_estimate_refuses_true_theta(t4_csv):
    assert run(["estimate", "--input", str(t4_csv), "--theta-source", "true"]) == ExitStatus.USAGE


def test_estimate_missing_file(tmp_path):
    assert run(["estimate", "--input", str(tmp_path / "none.csv")]) == ExitStatus.MISSING_FILE


def test_estimate_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("y,w,x1\n1,1,0.2\n2,0,oops\n")
    assert run(["estimate", "--input", str(path)]) == ExitStatus.PARSE
    assert "row 2" in capsys.readouterr().err


def test_unknown_flag():
    assert run(["bound", "--frobnicate"]) == ExitStatus.USAGE


def test_bad_value():
    assert run(["simulate", "--reps", "zero", "--output", "x.csv"]) == ExitStatus.USAGE


def test_help_lists_defaults(capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "240")
    assert run(["simulate", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--design", "--n", "--reps", "--seed", "--m", "--q", "--l", "--threads", "--output"):
        assert flag in out
    assert "default: 2000" in out
    assert "default: 512,1024,2048,4096,8192" in out


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("[psmatch]\nn = 64\nreps = 5\nseed = 3\nthreads = 1\n")
    target = tmp_path / "out.csv"
    assert run(["simulate", "--config", str(config), "--reps", "2", "--output", str(target), "--quiet"]) == 0
    provenance = target.read_text().splitlines()[0]
    assert "reps=2" in provenance
    assert "n=64" in provenance
    assert "base_seed=3" in provenance


def test_config_unknown_key(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("[psmatch]\nrepetitions = 5\n")
    assert run(["bound", "--config", str(config)]) == ExitStatus.USAGE


def test_config_percent_sign(tmp_path, capsys):
    config = tmp_path / "run.ini"
    config.write_text("[psmatch]\nreps = 5%\n")
    assert run(["bound", "--design", "1", "--config", str(config)]) == 0
    capsys.readouterr()
    code = run(["simulate", "--config", str(config), "--output", str(tmp_path / "out.csv"), "--quiet"])
    assert code == ExitStatus.USAGE
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_config_percent_sign_in_design(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("[psmatch]\nthreads = 1\n\n[design:pct]\nmu0 = 0, 1, 1 %\nmu1 = 2, 1, 1\n")
    assert run(["bound", "--config", str(config)]) == ExitStatus.DOMAIN


def test_unreadable_input(t4_csv, monkeypatch, capsys):
    def refuse(*args, **kwargs):
        raise PermissionError(13, "Permission denied")

    monkeypatch.setattr(data.pd, "read_csv", refuse)
    assert run(["estimate", "--input", str(t4_csv)]) == ExitStatus.MISSING_FILE
    assert "Permission denied" in capsys.readouterr().err


def test_config_missing(tmp_path):
    assert run(["bound", "--config", str(tmp_path / "none.ini")]) == ExitStatus.MISSING_FILE


def test_custom_design(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("[psmatch]\nthreads = 1\n\n[design:flat]\nmu0 = 0, 1, 1\nmu1 = 2, 1, 1\n")
    target = tmp_path / "flat.csv"
    args = ["--config", str(config), "--design", "flat", "--quiet"]
    assert run(["simulate", "--n", "64", "--reps", "2", "--output", str(target)] + args) == 0
    assert "design=flat" in target.read_text()
    assert run(["bound"] + args) == ExitStatus.DOMAIN


class Target:

    def op_fail(self, operation):
        raise BoundError("too many")

    def op_reject(self, operation):
        operation.status = operation.st.DOMAIN
        raise operation.ex("no")

    def op_ok(self, operation):
        operation.results = {"success": True, "message": "done"}


def test_operation_statuses():
    op = Operation(Target(), "fail").execute()
    assert (op.success, op.status, op.results["message"]) == (False, ExitStatus.BOUND, "too many")
    op = Operation(Target(), "reject").execute()
    assert (op.success, op.status) == (False, ExitStatus.DOMAIN)
    op = Operation(Target(), "ok").execute()
    assert op.success and op.status == ExitStatus.OK
    with pytest.raises(ValueError):
        Operation(Target(), "missing").execute()


def test_options_validate():
    options = build_options()
    assert options["n"].set("512, 1024").value == [512, 1024]
    assert options["m"].set("auto").value is None
    assert options["m"].display() == "auto"
    assert options["theta_source"].set("MLE").value == "mle"
    with pytest.raises(ValueError):
        options["alpha"].set("1.5")
    with pytest.raises(ValueError):
        options["n"].set("1")


def test_init_overrides():
    init(settings, DEFAULT_L=6)
    try:
        assert settings.DEFAULT_L == 6
        with pytest.raises(ValueError):
            init(settings, NOT_A_SETTING=1)
    finally:
        init(settings)
    assert settings.DEFAULT_L == 4
