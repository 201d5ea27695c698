import argparse
from pathlib import Path

import pytest

from glvortex import radial
from glvortex.cli import (EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_OK, RunConfig, build_parser,
                          main, resolve_config)
from glvortex.symmetry import SLACK_C


def _kv(path: Path) -> dict:
    return radial.read_keyvalue(path)


@pytest.fixture(scope="module")
def d1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("d1")
    assert main(["profile", "--d", "1", "--out", str(out)]) == EXIT_OK
    assert main(["synthesize", "--in", str(out / "profile.csv"), "--R", "20", "--n", "64",
                 "--out", str(out)]) == EXIT_OK
    assert main(["diagnose", "--in", str(out / "field.csv"), "--out", str(out)]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def d2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("d2")
    assert main(["solve-disk", "--d", "2", "--R", "5", "--n", "64", "--out", str(out)]) == EXIT_OK
    return out


def test_profile_summary_contents(d1_run):
    s = _kv(d1_run / "profile_summary.txt")
    assert int(s["degree"]) == 1
    assert float(s["quantization"]) == pytest.approx(1.0, abs=0.005)
    assert (d1_run / "profile_r_vs_f.dat").read_text().startswith("# r f\n")


def test_synthesize_and_diagnose_radial_vortex(d1_run):
    s = _kv(d1_run / "diagnostics_summary.txt")
    assert s["verdict"] == "symmetric"
    for name in ("diagnostics.csv", "diagnostics_t_vs_H.dat", "diagnostics_rho_vs_H.dat",
                 "diagnostics_t_vs_deficit.dat", "field_summary.txt"):
        assert (d1_run / name).is_file()


def test_report_writes_plot_data(d1_run, tmp_path, capsys):
    assert main(["report", "--in", str(d1_run / "diagnostics.csv"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "rho_vs_H_normalized.dat").is_file()
    assert (tmp_path / "rho_vs_isoperimetric_deficit.dat").is_file()
    rows = capsys.readouterr().out.strip().splitlines()
    n_levels = len((d1_run / "diagnostics.csv").read_text().splitlines()) - 1
    assert len(rows) == n_levels
    assert all(len(r.split()) == 2 for r in rows)


def test_solve_lift_diagnose_degree_two(d2_run, tmp_path):
    s = _kv(d2_run / "field_summary.txt")
    assert s["converged"] == "True"
    assert int(s["degree"]) == 2 and int(s["zeros"]) == 1
    assert main(["lift", "--d", "2", "--in", str(d2_run / "field.csv"),
                 "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "lifted.csv.meta").is_file()
    assert main(["diagnose", "--in", str(tmp_path / "lifted.csv"),
                 "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "kappa.csv").is_file()
    assert (tmp_path / "rho_vs_starshaped_decay.dat").is_file()
    assert _kv(tmp_path / "diagnostics_summary.txt")["verdict"] == "symmetric"


def test_raw_degree_two_field_is_a_hypothesis_violation(d2_run, tmp_path):
    assert main(["diagnose", "--in", str(d2_run / "field.csv"),
                 "--out", str(tmp_path)]) == EXIT_HYPOTHESIS


def test_unusable_input_exits_one(tmp_path):
    assert main(["diagnose", "--in", str(tmp_path / "missing.csv")]) == EXIT_NUMERICAL
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,field\n1,2\n")
    assert main(["diagnose", "--in", str(bad), "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert main(["profile", "--d", "-1", "--out", str(tmp_path)]) == EXIT_NUMERICAL


def test_lift_of_wrong_degree_exits_two(d2_run, tmp_path):
    assert main(["lift", "--d", "3", "--in", str(d2_run / "field.csv"),
                 "--out", str(tmp_path)]) == EXIT_HYPOTHESIS


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("d=2\nn=3000\nslack=0.5\n")
    args = build_parser().parse_args(["profile", "--config", str(cfg_file), "--n", "4000"])
    cfg = resolve_config(args)
    assert cfg.d == 2          # from the config file
    assert cfg.n == 4000       # flag overrides the file
    assert cfg.slack_C == 0.5
    assert cfg.r_max == 50.0   # default
    assert RunConfig("profile").slack_C == SLACK_C


def test_unknown_config_key_rejected(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("colour=blue\n")
    args = build_parser().parse_args(["profile", "--config", str(cfg_file)])
    with pytest.raises(ValueError):
        resolve_config(args)


def test_outputs_are_byte_identical_on_rerun(tmp_path):
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["profile", "--d", "2", "--n", "2000", "--out", str(out)]) == 0
        assert main(["synthesize", "--in", str(out / "profile.csv"), "--R", "20", "--n", "48",
                     "--out", str(out)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        data = (tmp_path / "a" / name).read_bytes()
        assert data == (tmp_path / "b" / name).read_bytes()
        assert b"\r" not in data
