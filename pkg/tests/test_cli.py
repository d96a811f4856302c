import numpy as np
import pytest

from fbsde.cli import (REPORT_COLUMNS, ConfigError, build_config,
                       compare_schemes, main, parse_config_text, run,
                       rows_to_csv)
from fbsde.model import make_problem, make_uniform_grid
from fbsde.simulate import euler_states, simulate_paths


def config_for(**kv):
    mapping = {"problem": "arctan", "scheme": "later", "paths": "2000",
               "steps": "5", "k": "4", "family": "hermite", "seed": "42"}
    mapping.update({k: str(v) for k, v in kv.items()})
    return build_config(mapping)


# --------------------------------------------------------------- parsing


def test_parse_config_text():
    text = """
    # comment line
    problem = call
    paths = 1000,2000   # inline comment
    out=prices.csv
    """
    mapping = parse_config_text(text)
    assert mapping == {"problem": "call", "paths": "1000,2000", "out": "prices.csv"}
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("not a pair")


def test_build_config_validation_messages():
    with pytest.raises(ConfigError, match="'problem'"):
        build_config({"problem": "lookback"})
    with pytest.raises(ConfigError, match="'scheme'"):
        build_config({"scheme": "sideways"})
    with pytest.raises(ConfigError, match="'paths'"):
        build_config({"paths": "0"})
    with pytest.raises(ConfigError, match="'k'"):
        build_config({"k": "2,nine"})
    with pytest.raises(ConfigError, match="'ridge'"):
        build_config({"ridge": "-0.5"})
    with pytest.raises(ConfigError, match="unknown config key"):
        build_config({"strike": "100"})
    with pytest.raises(ConfigError, match="'sigma'"):
        build_config({"problem": "call", "sigma": "-1"})


def test_config_defaults_and_sweeps():
    config = config_for(paths="1000,10000,100000", seed="1,2")
    assert config.paths == (1000, 10000, 100000)
    assert config.seed == (1, 2)
    assert config.k == (4,)
    assert config.problem.parameters["T"] == 1.0


# ---------------------------------------------------------------- runs


def test_single_run_row_fields():
    rows = run(config_for(paths=10_000, steps=10, k=6, seed=42))
    assert len(rows) == 1
    row = rows[0]
    assert (row.scheme, row.problem, row.M, row.N, row.k) == ("later", "arctan", 10_000, 10, 6)
    assert row.family == "hermite" and row.seed == 42
    assert row.y0_ref == 0.0 and row.z0_ref == 0.0
    assert row.abs_err_y == abs(row.y0_hat)
    assert row.err_basis == "absolute"


def test_sweep_with_both_schemes_row_count():
    rows = run(config_for(scheme="both", paths="500,1000,2000"))
    assert len(rows) == 6
    assert [r.scheme for r in rows] == ["later", "now"] * 3
    assert [r.M for r in rows] == [500, 500, 1000, 1000, 2000, 2000]


def test_compare_schemes_pairs_by_seed():
    config = config_for(problem="call", scheme="later", paths=1000,
                        family="laguerre",
                        seed=",".join(str(s) for s in range(1, 11)))
    rows = compare_schemes(config)
    assert len(rows) == 20
    pairs = {}
    for row in rows:
        pairs.setdefault((row.seed, row.M, row.N, row.k), []).append(row.scheme)
    assert all(sorted(v) == ["later", "now"] for v in pairs.values())


def test_both_schemes_share_one_ensemble(monkeypatch):
    calls = []
    import fbsde.cli as cli_module
    real = cli_module.simulate_paths

    def counting(*args, **kwargs):
        calls.append(args)
        return real(*args, **kwargs)

    monkeypatch.setattr(cli_module, "simulate_paths", counting)
    run(config_for(scheme="both", paths=500, seed="7,8"))
    assert len(calls) == 2  # one ensemble per sweep point, shared by schemes


def test_shared_ensemble_reconstructs_bitwise():
    # the ensemble any comparison run consumes satisfies the Euler
    # reconstruction identity, so both schemes saw the same increments
    config = config_for(problem="custom", scheme="both", paths=800)
    problem = make_problem(config.problem)
    grid = make_uniform_grid(problem.horizon, config.steps[0])
    ens = simulate_paths(problem, grid, config.paths[0], config.seed[0])
    assert np.array_equal(euler_states(problem, grid, ens.increments), ens.states)


def test_custom_problem_has_empty_reference_columns():
    rows = run(config_for(problem="custom", paths=500))
    row = rows[0]
    assert row.y0_ref is None and row.abs_err_y is None
    csv_text = rows_to_csv(rows)
    body = csv_text.splitlines()[1].split(",")
    ref_idx = REPORT_COLUMNS.index("y0_ref")
    assert body[ref_idx] == "" and body[ref_idx + 2] == ""


def test_csv_schema_and_precision(tmp_path):
    out = tmp_path / "rows.csv"
    code = main(["solve", "--problem", "arctan", "--paths", "600", "--steps", "4",
                 "--k", "3", "--family", "hermite", "--seed", "5",
                 "--out", str(out)])
    assert code == 0
    header, *body = out.read_text().splitlines()
    assert header == ",".join(REPORT_COLUMNS)
    assert len(body) == 1
    fields = body[0].split(",")
    y0_hat = fields[REPORT_COLUMNS.index("y0_hat")]
    assert len(y0_hat.replace("-", "").replace(".", "").lstrip("0")) >= 15
    assert float(y0_hat) == pytest.approx(0.0, abs=0.5)
    # errors consistent with hat/ref to 1e-12
    abs_err = float(fields[REPORT_COLUMNS.index("abs_err_y")])
    assert abs_err == pytest.approx(abs(float(y0_hat)), abs=1e-12)


def test_rerun_is_byte_identical(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = arctan\nscheme = both\npaths = 700\nsteps = 4\n"
                   "k = 3\nfamily = hermite\nseed = 11,12\n")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["solve", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_worker_count_does_not_change_output(tmp_path, monkeypatch):
    out1, out2 = tmp_path / "w1.csv", tmp_path / "w4.csv"
    args = ["solve", "--problem", "custom", "--paths", "3000", "--steps", "3",
            "--k", "3", "--family", "hermite", "--seed", "2"]
    monkeypatch.setenv("FBSDE_WORKERS", "1")
    assert main(args + ["--out", str(out1)]) == 0
    monkeypatch.setenv("FBSDE_WORKERS", "4")
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_sweep_rows_reproducible_from_point_configs():
    # a row's (y0_hat, z0_hat) depends only on (problem, M, N, k, family,
    # seed, ridge), not on the sweep it was embedded in
    sweep_rows = run(config_for(paths="500,900", seed="3,4"))
    for row in sweep_rows:
        single = run(config_for(paths=row.M, seed=row.seed))[0]
        assert single.y0_hat == row.y0_hat and single.z0_hat == row.z0_hat


def test_timings_flag_fills_runtime_column(tmp_path):
    out = tmp_path / "timed.csv"
    args = ["solve", "--problem", "custom", "--paths", "500", "--steps", "3",
            "--k", "3", "--seed", "2", "--out", str(out)]
    assert main(args) == 0
    idx = REPORT_COLUMNS.index("runtime_ms")
    assert out.read_text().splitlines()[1].split(",")[idx] == ""
    assert main(args + ["--timings"]) == 0
    assert float(out.read_text().splitlines()[1].split(",")[idx]) > 0.0


# ------------------------------------------------------------ exit codes


def test_exit_code_on_config_error(tmp_path, capsys):
    assert main(["solve", "--paths", "minus-one"]) == 2
    assert "paths" in capsys.readouterr().err
    assert main(["solve", "not_a_pair"]) == 2
    missing = tmp_path / "missing.cfg"
    assert main(["solve", "--config", str(missing)]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_exit_code_on_numerical_failure(tmp_path, capsys):
    # diffusion large enough to overflow the basis powers to inf
    out = tmp_path / "x.csv"
    code = main(["solve", "--problem", "custom", "s0=1e200", "b0=1e200",
                 "--paths", "200", "--steps", "4", "--k", "3",
                 "--seed", "1", "--out", str(out)])
    assert code == 3
    assert "numerical" in capsys.readouterr().err


def test_override_precedence(tmp_path):
    cfg = tmp_path / "base.cfg"
    cfg.write_text("problem = arctan\npaths = 500\nsteps = 4\nk = 3\nseed = 1\n")
    out = tmp_path / "o.csv"
    code = main(["solve", "--config", str(cfg), "paths=800",
                 "--out", str(out), "--seed", "9"])
    assert code == 0
    fields = out.read_text().splitlines()[1].split(",")
    assert fields[REPORT_COLUMNS.index("M")] == "800"
    assert fields[REPORT_COLUMNS.index("seed")] == "9"
