import json

import pytest

from linhash import theory
from linhash.cli import build_parser, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_dyadic_prints_value(capsys):
    code, out, _ = run_cli(capsys, "bound", "--kind", "dyadic", "--a", "2",
                           "--lambda", "1")
    assert code == 0
    assert float(out.strip()) == pytest.approx(
        theory.dyadic_fixed_bucket_bound(2, 1.0))
    assert out.startswith("0.21642")


def test_bound_maxload_json(capsys):
    code, out, _ = run_cli(capsys, "bound", "--kind", "maxload", "--ell",
                           "16", "--R", "2", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["value"] == 1.0
    assert payload["admissible"] is False


def test_pmf_square_lines(capsys):
    code, out, _ = run_cli(capsys, "pmf", "--square", "2")
    assert code == 0
    assert out.splitlines() == ["a=0:0.375", "a=1:0.5625", "a=2:0.0625"]


def test_pmf_rect(capsys):
    code, out, _ = run_cli(capsys, "pmf", "--rect", "1", "2")
    assert code == 0
    assert out.splitlines() == ["a=1:0.75", "a=2:0.25"]


def test_solve_t_and_expectation_bound(capsys):
    code, out, _ = run_cli(capsys, "solve-t", "--m", "65536", "--ell", "16")
    assert code == 0
    assert float(out) == pytest.approx(theory.solve_t_scale(65536, 16))
    code, out, _ = run_cli(capsys, "expectation-bound", "--ell", "1024",
                           "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["ratio_to_scale"] > 1.0


def test_mc_fixed_bucket_csv_deterministic(capsys):
    argv = ("mc-fixed-bucket", "--u", "10", "--ell", "6", "--m", "64",
            "--r", "2", "--trials", "2000", "--seed", "5")
    code1, out1, _ = run_cli(capsys, *argv)
    code2, out2, _ = run_cli(capsys, *argv, "--threads", "3")
    assert code1 == code2 == 0
    assert out1 == out2
    header = out1.splitlines()[0]
    assert header == ("name,u,ell,m,threshold,trials,successes,p_hat,ci_low,"
                      "ci_high,theory_bound,admissible,seed")


def test_mc_fixed_bucket_env_seed(capsys, monkeypatch):
    argv = ("mc-fixed-bucket", "--u", "8", "--ell", "4", "--m", "16",
            "--r", "1", "--trials", "500")
    monkeypatch.setenv("LINHASH_SEED", "99")
    _, out_env, _ = run_cli(capsys, *argv)
    monkeypatch.delenv("LINHASH_SEED")
    _, out_default, _ = run_cli(capsys, *argv, "--seed", "99")
    assert out_env == out_default


def test_mc_fixed_bucket_sweep_rows(capsys):
    code, out, _ = run_cli(capsys, "mc-fixed-bucket", "--u", "8", "--ell",
                           "4", "--m", "16", "--r", "1", "--trials", "300",
                           "--seed", "3", "--sweep-buckets", "4")
    assert code == 0
    assert len(out.strip().splitlines()) == 5  # header + 4 bucket rows


def test_mc_max_load_reports_mean(capsys):
    code, out, err = run_cli(capsys, "mc-max-load", "--u", "10", "--ell", "5",
                             "--m", "32", "--T", "1", "--trials", "200",
                             "--seed", "4")
    assert code == 0
    assert "mean_load=" in err
    row = out.strip().splitlines()[1]
    assert row.startswith("mc-max-load,10,5,32,1.0,200,200,")


def test_mc_surjectivity_row(capsys):
    code, out, _ = run_cli(capsys, "mc-surjectivity", "--u", "8", "--ell",
                           "5", "--trials", "1000", "--seed", "6")
    assert code == 0
    assert out.splitlines()[1].startswith("mc-surjectivity,8,5,")


def test_sharpness_row_and_diagnostics(capsys):
    code, out, err = run_cli(capsys, "sharpness", "--d", "3", "--ell", "3",
                             "--a", "2", "--trials", "2000", "--seed", "7")
    assert code == 0
    assert "nullity_tail=" in err
    assert out.splitlines()[1].startswith("sharpness,4,3,8,2,2000,")


def test_potential_trace_csv(capsys, tmp_path):
    path = tmp_path / "trace.csv"
    code, out, _ = run_cli(capsys, "potential-trace", "--u", "10", "--ell",
                           "6", "--m", "64", "--b", "2", "--seed", "8",
                           "--out", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "stage,phi,phi_minus_one,log_phi"
    assert len(lines) == 6  # k = u - ell = 4, stages 0..4


def test_verify_lemmas_gate(capsys):
    code, out, _ = run_cli(capsys, "verify-lemmas", "--u", "12", "--ell", "8",
                           "--trials", "100", "--seed", "7")
    assert code == 0
    assert "growth 100/100" in out
    assert "heavy-bin 100/100" in out
    assert "conditional 400/400" in out


def test_invalid_arguments_exit_one(capsys):
    code, _, err = run_cli(capsys, "mc-fixed-bucket", "--u", "3", "--ell",
                           "6", "--m", "9", "--r", "1", "--trials", "10",
                           "--surjective")
    assert code == 1
    assert "error" in err.lower()
    code, _, _ = run_cli(capsys, "bound", "--kind", "dyadic")  # missing --a
    assert code == 1


def test_unknown_flag_exits_one(capsys):
    assert main(["bound", "--nope"]) == 1


def test_falsified_invariant_exits_two(capsys, monkeypatch):
    from linhash import cli
    from linhash.experiments import InvariantViolation

    def boom(*args, **kwargs):
        raise InvariantViolation("synthetic: ci_low exceeds the bound")

    monkeypatch.setattr(cli, "mc_surjectivity", boom)
    code = main(["mc-surjectivity", "--u", "5", "--ell", "3",
                 "--trials", "10"])
    assert code == 2
    assert "invariant" in capsys.readouterr().err.lower()


def test_every_subcommand_has_help(capsys):
    parser = build_parser()
    subactions = [a for a in parser._actions
                  if isinstance(a, __import__("argparse")._SubParsersAction)]
    names = list(subactions[0].choices)
    assert sorted(names) == sorted([
        "bound", "pmf", "solve-t", "expectation-bound", "mc-fixed-bucket",
        "mc-max-load", "mc-surjectivity", "sharpness", "potential-trace",
        "verify-lemmas"])
    for name in names:
        with pytest.raises(SystemExit) as exc:
            parser.parse_args([name, "--help"])
        assert exc.value.code == 0
        help_text = capsys.readouterr().out
        assert "--" in help_text
