import pytest

from blockprior.cli import main
from blockprior.gibbs import read_trace
from blockprior.harness import parse_csv

SMALL = ["--methods", "BLOCK,SIEVE_A", "--alpha", "1", "--n", "64", "--trials", "4", "--sweeps", "6", "--burn-in", "2"]


def _simulate(tmp_path, name, *extra, env=None, monkeypatch=None):
    out = tmp_path / name
    if monkeypatch is not None:
        if env is None:
            monkeypatch.delenv("BLOCKPRIOR_SEED", raising=False)
        else:
            monkeypatch.setenv("BLOCKPRIOR_SEED", env)
    assert main(["simulate", *SMALL, *extra, "--out", str(out)]) == 0
    return out.read_bytes()


def test_simulate_is_byte_identical(tmp_path, monkeypatch):
    a = _simulate(tmp_path, "a.csv", "--seed", "7", monkeypatch=monkeypatch)
    b = _simulate(tmp_path, "b.csv", "--seed", "7", monkeypatch=monkeypatch)
    c = _simulate(tmp_path, "c.csv", "--seed", "8", monkeypatch=monkeypatch)
    assert a == b and a != c


def test_precedence_of_seed_sources(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 3\ntrials = 2\n")
    from_file = parse_csv(_simulate(tmp_path, "f.csv", "--config", str(cfg), monkeypatch=monkeypatch).decode())
    assert from_file.metadata["seed"] == 3
    flag = parse_csv(_simulate(tmp_path, "g.csv", "--config", str(cfg), "--seed", "4", monkeypatch=monkeypatch).decode())
    assert flag.metadata["seed"] == 4
    env = parse_csv(
        _simulate(tmp_path, "h.csv", "--config", str(cfg), "--seed", "4", env="12", monkeypatch=monkeypatch).decode()
    )
    assert env.metadata["seed"] == 12
    # --trials on the command line beat the file
    assert all(c.trials == 4 for c in env.cells())


def test_markdown_output(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("BLOCKPRIOR_SEED", raising=False)
    assert main(["simulate", *SMALL, "--format", "markdown"]) == 0
    out = capsys.readouterr().out
    assert "Estimation errors for n=64" in out and "| 1 | BLOCK |" in out


def test_bad_inputs_exit_with_usage(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("BLOCKPRIOR_SEED", raising=False)
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--bogus"])
    assert exc.value.code == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this line has no equals sign\n")
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert "usage:" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2
    monkeypatch.setenv("BLOCKPRIOR_SEED", "abc")
    assert main(["simulate", *SMALL]) == 2


def test_sample_dumps_draws(tmp_path, capsys):
    dump = tmp_path / "draws.csv"
    args = ["sample", "--n", "64", "--sweeps", "10", "--burn-in", "3", "--dump", str(dump)]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert "l2_risk=" in first
    sweeps, draws = read_trace(dump)
    assert sweeps.tolist() == list(range(3, 10)) and draws.shape == (7, 64)
    assert main(args) == 0
    assert capsys.readouterr().out == first


def test_oracle_command(capsys):
    assert main(["oracle", "--k", "1", "--n", "100", "--x", "0.1,-0.2,0.05,0.3,0.0"]) == 0
    out = capsys.readouterr().out
    assert "shrinkage=" in out and "A_quantiles=" in out
    assert main(["oracle", "--k", "3", "--n", "256"]) == 0
    assert main(["oracle", "--k", "40", "--n", "256"]) == 2


@pytest.mark.slow
def test_verify_quick_exit_code(capsys):
    assert main(["verify", "--level", "quick"]) == 0
    assert "overall: PASS" in capsys.readouterr().out
