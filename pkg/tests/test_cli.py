import csv
import json

import pytest

from qwabsorb import cli
from qwabsorb.errors import ConfigurationError


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    config = json.loads(lines[0][len("# config: "):])
    return config, list(csv.DictReader(lines[1:]))


def test_hypercube_table(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert cli.main(["hypercube-table", "--n", "8", "-o", str(out)]) == 0
    config, rows = read_csv(out)
    assert config["n"] == 8 and config["start"] == "symmetric"
    assert len(rows) == 9
    assert float(rows[4]["prob"]) == pytest.approx(0.1143, abs=1e-3)
    assert float(rows[4]["time_real"]) == pytest.approx(115.5175, rel=5e-3)
    assert len([l for l in capsys.readouterr().out.splitlines() if l.startswith("hypercube-table")]) == 9


def test_line_rm_single_row(tmp_path):
    out = tmp_path / "l.csv"
    assert cli.main(["line-rm", "--p", "0.5", "--m-max", "1", "--t-max", "5000",
                     "-o", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 1
    assert float(rows[0]["r_m"]) == pytest.approx(0.6366, abs=1e-3)
    assert list(rows[0]) == ["m", "p", "r_m", "T", "residual"]


def test_line_limit_sweep_grid(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["line-limit-sweep", "--m", "3", "--p-step", "0.25", "--t-max", "300",
                     "-o", str(out)]) == 0
    _, rows = read_csv(out)
    assert [float(r["p"]) for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_classical_scaling(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["classical-scaling", "--n-max", "2", "--trials", "2000",
                     "-o", str(out)]) == 0
    config, rows = read_csv(out)
    n2 = [float(r["s_exact"]) for r in rows if r["n"] == "2"]
    assert n2 == [0.0, 3.0, 4.0]
    assert config["seed"] == 0
    assert len({r["seed"] for r in rows}) == len(rows)


def test_solver_crosscheck(tmp_path):
    out = tmp_path / "x.csv"
    gen = tmp_path / "a.csv"
    assert cli.main(["solver-crosscheck", "--n-min", "2", "--n-max", "6",
                     "--t-generating", "50", "--generating-output", str(gen),
                     "-o", str(out)]) == 0
    _, rows = read_csv(out)
    assert [int(r["n"]) for r in rows] == [2, 3, 4, 5, 6]
    assert all(float(r["max_rel_diff"]) < 1e-6 for r in rows)
    _, coeffs = read_csv(gen)
    assert len(coeffs) == 5 * 51


def test_hypercube_scaling(tmp_path):
    out = tmp_path / "h.csv"
    assert cli.main(["hypercube-scaling", "--n-max", "5", "--average-n-max", "4",
                     "--fit-n-min", "2", "-o", str(out)]) == 0
    _, rows = read_csv(out)
    antipodal = {int(r["n"]): float(r["time_real"]) for r in rows if r["n"] == r["i"]}
    assert antipodal[2] == pytest.approx(2.0)
    _, fits = read_csv(tmp_path / "h_fits.csv")
    assert {f["model"] for f in fits if f["kind"] == "fit"} == {"c*n^2", "c*n^1.5", "1.25*n^1.5"}
    assert [int(f["n"]) for f in fits if f["kind"] == "average"] == [1, 2, 3, 4]


def test_deterministic_bytes(tmp_path):
    paths = []
    for k, jobs in enumerate(["1", "1", "2"]):
        out = tmp_path / f"c{k}.csv"
        assert cli.main(["classical-scaling", "--n-max", "3", "--trials", "3000",
                         "--seed", "7", "--jobs", jobs, "-o", str(out)]) == 0
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    # only the recorded job count differs
    body = [p.read_text().splitlines()[1:] for p in paths]
    assert body[0] == body[2]


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "runs"))
    assert cli.main(["classical-scaling", "--n-max", "1", "--trials", "10"]) == 0
    assert (tmp_path / "runs" / "classical-scaling.csv").exists()


def test_exit_codes(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["no-such-command"])
    assert info.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["line-rm", "--m-max", "many"])
    assert info.value.code == cli.EXIT_USAGE
    assert cli.main(["line-rm", "--eps", "0", "-o", str(tmp_path / "a.csv")]) == cli.EXIT_USAGE
    assert cli.main(["line-rm", "--m-min", "4", "--m-max", "2",
                     "-o", str(tmp_path / "a.csv")]) == cli.EXIT_USAGE
    bad = tmp_path / "r.csv"
    assert cli.main(["hypercube-table", "--n", "6", "--cap", "5",
                     "-o", str(bad)]) == cli.EXIT_RESOURCE
    assert not bad.exists()
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["classical-scaling", "--n-max", "1",
                     "-o", str(blocker / "x.csv")]) == cli.EXIT_OUTPUT


def test_convergence_exit(tmp_path, monkeypatch):
    def failing(*args, **kwargs):
        raise cli.ConvergenceError("forced", 1.0)

    monkeypatch.setattr(cli, "solve_stein", failing)
    assert cli.main(["solver-crosscheck", "--n-max", "3",
                     "-o", str(tmp_path / "x.csv")]) == cli.EXIT_CONVERGENCE


def test_config_validation():
    with pytest.raises(ConfigurationError):
        cli.ExperimentConfig(command="nope", params={})
    with pytest.raises(ConfigurationError):
        cli.ExperimentConfig(command="line-rm", params={"t_max": 0})
    with pytest.raises(ConfigurationError):
        cli.ExperimentConfig(command="line-rm", params={}, jobs=0)
