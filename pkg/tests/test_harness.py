import numpy as np
import pytest

from cpgd.harness import (ConfigError, MatrixFormatError, apply_overrides,
                          build_experiment_config, gen_data, load_matrix, main,
                          parse_config_file, run_experiment, save_matrix)
from cpgd.solver import RunLog, SeparableQuadratic


def read_log_without_elapsed(path):
    lines = open(path).read().splitlines()
    header = lines[0].split(",")
    drop = header.index("elapsed_s")
    return [",".join(v for j, v in enumerate(ln.split(",")) if j != drop)
            for ln in lines]


# ---------------------------------------------------------------------------
# matrix I/O


def test_binary_roundtrip_bit_exact(tmp_path):
    path = tmp_path / "m.bin"
    M = np.eye(2)
    save_matrix(path, M)
    back = load_matrix(path)
    assert back.shape == (2, 2)
    assert np.array_equal(back, M)
    # adversarial payload: denormals, huge, negative zero
    M2 = np.array([[5e-324, -0.0, 1e308], [np.pi, -2.75, 1e-308]])
    p2 = tmp_path / "m2.bin"
    save_matrix(p2, M2)
    assert load_matrix(p2).tobytes() == M2.tobytes()


def test_csv_roundtrip_and_shape(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2\n3,4\n")
    M = load_matrix(path)
    assert M.shape == (2, 2)
    assert np.array_equal(M, [[1.0, 2.0], [3.0, 4.0]])

    rng = np.random.default_rng(0)
    M2 = rng.standard_normal((4, 3))
    p2 = tmp_path / "m2.csv"
    save_matrix(p2, M2)
    back = load_matrix(p2)
    assert np.max(np.abs(back - M2)) <= 1e-15 * np.max(np.abs(M2))


def test_ragged_csv_names_offending_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(MatrixFormatError, match="line 2"):
        load_matrix(path)


def test_csv_bad_value_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,zap\n")
    with pytest.raises(MatrixFormatError, match="line 2"):
        load_matrix(path)


def test_binary_header_errors(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(MatrixFormatError, match="magic"):
        load_matrix(path)
    path2 = tmp_path / "trunc.bin"
    path2.write_bytes(b"CPGDMAT1" + b"\x00" * 4)
    with pytest.raises(MatrixFormatError, match="header"):
        load_matrix(path2)
    import struct
    path3 = tmp_path / "short.bin"
    path3.write_bytes(b"CPGDMAT1" + struct.pack("<QQ", 2, 2) + b"\x00" * 8)
    with pytest.raises(MatrixFormatError, match="payload"):
        load_matrix(path3)


def test_nonfinite_rejected(tmp_path):
    with pytest.raises(MatrixFormatError, match="non-finite"):
        save_matrix(tmp_path / "x.bin", np.array([[np.inf]]))
    path = tmp_path / "n.csv"
    path.write_text("1,nan\n")
    with pytest.raises(MatrixFormatError, match="non-finite"):
        load_matrix(path)


def test_unknown_extension(tmp_path):
    with pytest.raises(MatrixFormatError, match="extension"):
        save_matrix(tmp_path / "m.txt", np.eye(2))


# ---------------------------------------------------------------------------
# configuration


def test_parse_config_and_overrides(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nproblem = quadratic\nmax_cycles = 50\n")
    settings = parse_config_file(cfg)
    assert settings == {"problem": "quadratic", "max_cycles": "50"}
    merged = apply_overrides(settings, ["max_cycles=99", "seed=3"])
    assert merged["max_cycles"] == "99"
    assert merged["seed"] == "3"
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides(settings, ["oops"])


def test_config_validation_errors(tmp_path):
    with pytest.raises(ConfigError, match="problem"):
        build_experiment_config({"problem": "nope"})
    with pytest.raises(ConfigError, match="unknown config keys"):
        build_experiment_config({"problem": "quadratic", "bogus": "1"})
    with pytest.raises(ConfigError, match="solver"):
        build_experiment_config({"problem": "quadratic", "solver": "x"})
    with pytest.raises(ConfigError, match="not found"):
        build_experiment_config({"problem": "onmf", "onmf.data": "ghost.bin"},
                                base_dir=tmp_path)
    with pytest.raises(ConfigError, match="missing onmf.m"):
        build_experiment_config({"problem": "onmf"})
    with pytest.raises(ConfigError, match="eta_multiplier"):
        build_experiment_config({"problem": "quadratic",
                                 "eta_multiplier": "0.4"})


def test_quadratic_experiment_reaches_closed_form_optimum(tmp_path):
    import time
    settings = {"problem": "quadratic", "quad.target": "2,-3",
                "max_cycles": "3000", "out_dir": "out", "seed": "1"}
    cfg = build_experiment_config(settings, base_dir=tmp_path)
    t0 = time.perf_counter()
    summary = run_experiment(cfg, base_dir=tmp_path)
    assert time.perf_counter() - t0 < 1.0
    prob = SeparableQuadratic([2.0, -3.0])
    assert abs(summary["cpgd"]["final_F"] - prob.optimal_value()) <= 1e-10
    assert (tmp_path / "out" / "runlog_cpgd.csv").is_file()
    assert (tmp_path / "out" / "summary.txt").is_file()
    assert (tmp_path / "out" / "config_echo.txt").is_file()
    echo = (tmp_path / "out" / "config_echo.txt").read_text()
    assert "problem = quadratic" in echo


def test_summary_matches_last_log_row(tmp_path):
    settings = {"problem": "quadratic", "quad.target": "1,2,-1",
                "max_cycles": "200", "out_dir": "out"}
    cfg = build_experiment_config(settings, base_dir=tmp_path)
    summary = run_experiment(cfg, base_dir=tmp_path)
    log = RunLog.from_csv(tmp_path / "out" / "runlog_cpgd.csv")
    last = log.final
    assert summary["cpgd"]["final_F"] == last.F
    assert summary["cpgd"]["cycles"] == last.cycle


def test_onmf_synthetic_experiment_monotone_F(tmp_path):
    settings = {"problem": "onmf", "onmf.m": "30", "onmf.n": "40",
                "onmf.rank": "3", "onmf.lambda": "10", "max_cycles": "80",
                "out_dir": "out", "seed": "2"}
    cfg = build_experiment_config(settings, base_dir=tmp_path)
    run_experiment(cfg, base_dir=tmp_path)
    log = RunLog.from_csv(tmp_path / "out" / "runlog_cpgd.csv")
    F = log.F_values
    assert np.all(np.diff(F) <= 1e-8 * (1 + np.abs(F[:-1])))
    assert "ortho_error" in log.metric_keys
    assert "fit_residual" in log.metric_keys


def test_reproducible_logs_byte_identical_excluding_elapsed(tmp_path):
    base = {"problem": "onmf", "onmf.m": "12", "onmf.n": "15",
            "onmf.rank": "2", "onmf.lambda": "5", "max_cycles": "40",
            "seed": "7"}
    for sub in ("a", "b"):
        cfg = build_experiment_config({**base, "out_dir": sub},
                                      base_dir=tmp_path)
        run_experiment(cfg, base_dir=tmp_path)
    log_a = read_log_without_elapsed(tmp_path / "a" / "runlog_cpgd.csv")
    log_b = read_log_without_elapsed(tmp_path / "b" / "runlog_cpgd.csv")
    assert log_a == log_b


def test_both_selector_emits_matching_schemas_and_close_final_F(tmp_path):
    settings = {"problem": "quadratic", "quad.target": "2,-3,0.5,1",
                "quad.weights": "1,0.5,2,1", "quad.blocks": "2,2",
                "solver": "both", "max_cycles": "5000", "out_dir": "out"}
    cfg = build_experiment_config(settings, base_dir=tmp_path)
    summary = run_experiment(cfg, base_dir=tmp_path)
    head_c = open(tmp_path / "out" / "runlog_cpgd.csv").readline()
    head_p = open(tmp_path / "out" / "runlog_pgd.csv").readline()
    assert head_c == head_p
    assert abs(summary["cpgd"]["final_F"]
               - summary["pgd-baseline"]["final_F"]) <= 1e-6


def test_experiment_from_matrix_file(tmp_path):
    from cpgd.onmf import synthetic_instance
    inst, _ = synthetic_instance(10, 12, 2, 0.0, seed=3, lam=5.0)
    save_matrix(tmp_path / "X.bin", inst.X)
    settings = {"problem": "onmf", "onmf.data": "X.bin", "onmf.rank": "2",
                "onmf.lambda": "5", "max_cycles": "30", "out_dir": "out"}
    cfg = build_experiment_config(settings, base_dir=tmp_path)
    summary = run_experiment(cfg, base_dir=tmp_path)
    assert summary["cpgd"]["cycles"] == 30


def test_gen_data_deterministic_and_dims(tmp_path):
    spec = {"m": "9", "n": "11", "r": "3", "seed": "5", "out": "d1",
            "format": "bin", "save_factors": "true"}
    paths = gen_data(spec, base_dir=tmp_path)
    assert [p.name for p in paths] == ["d1_X.bin", "d1_W.bin", "d1_V.bin"]
    X = load_matrix(paths[0])
    assert X.shape == (9, 11)
    W = load_matrix(paths[1])
    V = load_matrix(paths[2])
    assert W.shape == (9, 3) and V.shape == (3, 11)
    assert np.allclose(W @ V, X)
    spec2 = dict(spec, out="d2")
    paths2 = gen_data(spec2, base_dir=tmp_path)
    assert paths[0].read_bytes()[8:] == paths2[0].read_bytes()[8:]
    with pytest.raises(ConfigError, match="needs r"):
        gen_data({"m": "3", "n": "3"}, base_dir=tmp_path)


def test_rates_fit_in_summary(tmp_path):
    settings = {"problem": "quadratic", "quad.target": "2,-3",
                "max_cycles": "500", "rates_fit": "true", "out_dir": "out"}
    cfg = build_experiment_config(settings, base_dir=tmp_path)
    summary = run_experiment(cfg, base_dir=tmp_path)
    assert summary["cpgd"]["rate_fit"].regime == "linear"
    assert "regime: linear" in (tmp_path / "out" / "summary.txt").read_text()


# ---------------------------------------------------------------------------
# CLI


def write_quad_config(tmp_path, **extra):
    lines = ["problem = quadratic", "quad.target = 2,-3",
             "max_cycles = 2000", "out_dir = out"]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    cfg = tmp_path / "exp.txt"
    cfg.write_text("\n".join(lines) + "\n")
    return cfg


def test_cli_check_and_solve(tmp_path, capsys):
    cfg = write_quad_config(tmp_path)
    assert main(["check", str(cfg)]) == 0
    assert "config ok" in capsys.readouterr().out
    assert main(["solve", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "cpgd: converged" in out
    assert (tmp_path / "out" / "runlog_cpgd.csv").is_file()


def test_cli_override_wins(tmp_path):
    cfg = write_quad_config(tmp_path)
    assert main(["solve", str(cfg), "out_dir=alt", "max_cycles=5"]) == 0
    assert (tmp_path / "alt" / "runlog_cpgd.csv").is_file()
    log = RunLog.from_csv(tmp_path / "alt" / "runlog_cpgd.csv")
    assert len(log) == 5


def test_cli_config_error_exit_code(tmp_path):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("problem = nope\n")
    assert main(["check", str(cfg)]) == 2
    assert main(["solve", str(cfg)]) == 2
    assert main(["solve", str(tmp_path / "missing.txt")]) == 4


def test_cli_gen_data_and_rates(tmp_path, capsys):
    spec = tmp_path / "gen.txt"
    spec.write_text("m = 8\nn = 10\nr = 2\nseed = 1\nout = data\n")
    assert main(["gen-data", str(spec)]) == 0
    assert (tmp_path / "data_X.bin").is_file()

    cfg = write_quad_config(tmp_path, max_cycles=400)
    assert main(["solve", str(cfg)]) == 0
    capsys.readouterr()
    runlog = tmp_path / "out" / "runlog_cpgd.csv"
    assert main(["rates", str(runlog)]) == 0
    out = capsys.readouterr().out
    assert "regime: linear" in out
    per_k = tmp_path / "perk.csv"
    assert main(["rates", str(runlog), "--csv", str(per_k)]) == 0
    assert per_k.read_text().startswith("cycle,gap,stat_bound,kl_rhs")


def test_cli_io_error_exit_code(tmp_path):
    missing = tmp_path / "none.csv"
    assert main(["rates", str(missing)]) == 4
