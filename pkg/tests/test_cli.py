import csv

import pytest

from hawkesgreeks.cli import main
from hawkesgreeks.config import ConfigError, parse_config


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def rows(p):
    return list(csv.reader(open(p)))


def test_empty_file_gives_defaults(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# nothing\n\n")
    cfg = parse_config(f)
    assert cfg.mc.n_paths == 10_000 and cfg.mc.grid_n == 100 and cfg.model.s0 == 5.0
    assert cfg.hawkes.alpha == 0.3 and cfg.mc.kind == "european"


def test_flags_override_file(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("seed = 3\npaths = 10\n")
    assert parse_config(f, {"seed": "7"}).mc.seed == 7
    assert parse_config(f).mc.seed == 3


@pytest.mark.parametrize("text", ["colour = red\n", "paths = many\n", "sigma = -1\n", "just words\n"])
def test_bad_config_files(tmp_path, text):
    f = tmp_path / "c.cfg"
    f.write_text(text)
    with pytest.raises(ConfigError):
        parse_config(f)
    assert run(tmp_path, "price", "--config", str(f)) == 2


def test_missing_config_file(tmp_path):
    assert run(tmp_path, "price", "--config", str(tmp_path / "nope.cfg")) == 2


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("HAWKESGREEKS_OUT", str(tmp_path / "env"))
    assert main(["price", "--paths", "20"]) == 0
    assert (tmp_path / "env" / "price.csv").exists()


def test_price_and_delta_outputs(tmp_path):
    assert run(tmp_path, "price", "--paths", "50") == 0
    assert rows(tmp_path / "price.csv")[0] == ["kind", "K", "value", "stderr", "n_paths"]
    assert run(tmp_path, "delta", "--paths", "50", "--kind", "asian") == 0
    r = rows(tmp_path / "delta.csv")
    assert r[0] == ["method", "K", "value", "stderr", "n_paths"]
    assert [x[0] for x in r[1:]] == ["EXACT", "WM", "PM", "WP", "FD"]
    assert run(tmp_path, "delta", "--paths", "50", "--method", "fd", "--timings") == 0
    r = rows(tmp_path / "delta.csv")
    assert r[0][-1] == "wallclock" and len(r) == 2


def test_degenerate_model_exit_code(tmp_path):
    assert run(tmp_path, "delta", "--paths", "20", "--method", "pm", "--set", "jump=zero") == 3
    assert run(tmp_path, "delta", "--paths", "20", "--method", "wm", "--set", "jump=zero") == 0


def test_bad_set_syntax(tmp_path):
    assert run(tmp_path, "price", "--set", "paths") == 2
    assert run(tmp_path, "price", "--set", "bogus=1") == 2


def test_convergence_gate_exit_code(tmp_path):
    assert run(tmp_path, "convergence", "--paths", "200", "--set", "grids=25,50,100") == 0
    assert rows(tmp_path / "convergence_slopes.csv")[0] == ["quantity", "slope", "gate", "passed"]
    # Poisson intensity: no lambda error, slope undefined, gate fails
    assert run(tmp_path, "convergence", "--paths", "20", "--set", "alpha=0",
               "--set", "grids=25,50") == 4


def test_table_and_dump_path(tmp_path):
    assert run(tmp_path, "table", "--paths", "20", "--method", "fd") == 0
    assert rows(tmp_path / "mse_european.csv")[1][0] == "FD"
    assert len(rows(tmp_path / "curves_european.csv")) == 27
    assert len(rows(tmp_path / "reference_european.csv")) == 27
    assert run(tmp_path, "dump-path", "--path-index", "4", "--weights") == 0
    assert rows(tmp_path / "path_4.csv")[0] == ["t", "lambda", "X", "S"]
    assert len(rows(tmp_path / "weights_4.csv")) == 101


def test_outputs_are_byte_identical_across_workers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["delta", "--paths", "600", "--seed", "5", "--out", str(a)]) == 0
    assert main(["delta", "--paths", "600", "--seed", "5", "--workers", "3", "--out", str(b)]) == 0
    assert (a / "delta.csv").read_bytes() == (b / "delta.csv").read_bytes()


def test_unstable_hawkes_parameters(tmp_path, capsys):
    with pytest.raises(ConfigError, match="stability violated"):
        parse_config(None, {"alpha": "0.9"})
    assert run(tmp_path, "price", "--set", "alpha=0.9") == 2
    assert "stability violated" in capsys.readouterr().err


def test_invalid_value_names_the_key(tmp_path, capsys):
    assert run(tmp_path, "price", "--paths", "lots") == 2
    assert "paths" in capsys.readouterr().err
