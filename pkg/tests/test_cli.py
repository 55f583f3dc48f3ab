import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nhsr import cli
from nhsr.cli import RunConfig, main
from nhsr.errors import ConfigError, SolverError
from nhsr.io import read_csv

DATA_SUFFIXES = (".csv",)


def data_files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix == ".csv" or p.name.endswith(".json")
            and p.name != "manifest.json"}


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


configs = st.builds(
    RunConfig,
    command=st.sampled_from(cli.COMMANDS),
    model=st.sampled_from(["ho", "pt1", "pt2"]),
    d=st.integers(2, 4096),
    n=st.integers(1, 100),
    eps=st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=3).map(tuple),
    gamma=st.sampled_from(["", "1.5", "1e-2:1e2:200log", "0:3:4lin"]),
    nr=st.integers(1, 10**6),
    seed=st.integers(0, 2**64 - 1),
    workers=st.integers(0, 64),
    out=st.sampled_from(["run", "out/x"]),
    d_list=st.lists(st.integers(2, 4096), min_size=1, max_size=4).map(tuple),
    theta=st.floats(0.01, 3.1),
)


@given(configs)
def test_config_roundtrip(cfg):
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_config_file_and_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# demo\ncommand = cumulants\nmodel = pt2\nd = 8\nn = 3\neps = 3\ngamma = 7\nnr = 4\nseed = 1\n")
    out = tmp_path / "o"
    assert main(["cumulants", "--config", str(f), "--nr", "2", "--out", str(out)]) == 0
    m = manifest(out)
    assert m["config"]["nr"] == 2 and m["config"]["model"] == "pt2"
    report = json.loads((out / "cumulants.json").read_text())
    assert all(report["identities_hold"].values())
    assert report["realizations"] == 2


@pytest.mark.parametrize("argv,field", [
    (["sweep", "--n", "20"], "n"),
    (["widths", "--gamma", "1:2:3"], "gamma"),
    (["widths"], "gamma"),
    (["sweep", "--model", "nope"], "model"),
    (["sweep", "--gamma", "0:1:5log"], "gamma"),
    (["sweep", "--nr", "0"], "nr"),
    (["sweep", "--d", "x"], "d"),
    (["scaling", "--d-list", "64,128", "--nr-list", "4"], "nr_list"),
    (["two-level", "--theta", "0"], "theta"),
    (["ep-map", "--d", "64", "--n", "2"], "d"),
])
def test_config_errors_exit_1(tmp_path, capsys, argv, field):
    assert main(argv + ["--out", str(tmp_path / "o")]) == 1
    assert field in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    f = tmp_path / "c.cfg"
    f.write_text("command = sweep\nbogus = 3\n")
    assert main(["sweep", "--config", str(f)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_validation_precedes_compute(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--n", "99", "--out", str(out)]) == 1
    assert not out.exists()


def test_worker_count_invariance(tmp_path):
    common = ["--model", "ho", "--d", "8", "--n", "3", "--nr", "5", "--seed", "42", "--gamma", "1e-2:1e2:40log"]
    outs = []
    for w in (1, 2, 4):
        out = tmp_path / f"w{w}"
        assert main(["sweep", *common, "--workers", str(w), "--out", str(out)]) == 0
        outs.append(data_files(out))
    assert outs[0] == outs[1] == outs[2]


def test_env_workers(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    out = tmp_path / "o"
    assert main(["cumulants", "--d", "6", "--n", "2", "--gamma", "1", "--nr", "4", "--out", str(out)]) == 0
    assert manifest(out)["timing"]["workers"] == 3
    monkeypatch.setenv(cli.WORKERS_ENV, "zero")
    assert main(["cumulants", "--d", "6", "--n", "2", "--gamma", "1", "--out", str(out)]) == 1


def test_csv_format(tmp_path):
    out = tmp_path / "o"
    assert main(["two-level", "--eps", "0.3,1.5", "--gamma", "0.1:10:5log", "--out", str(out)]) == 0
    raw = (out / "two_level.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "eps,gamma,width1,width2,energy1,energy2"
    assert len(lines) == 11
    first = lines[1].split(",")
    assert float(first[0]) == 0.3 and first[0] == "%.17g" % 0.3


def test_two_level_csv_values(tmp_path):
    out = tmp_path / "o"
    assert main(["two-level", "--eps", "0", "--gamma", "0.1:0.9:5lin", "--out", str(out)]) == 0
    _, data = read_csv(out / "two_level.csv")
    np.testing.assert_allclose(data[:, 2], data[:, 1] / 2, atol=1e-12)


def test_spectrum_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["spectrum", "--model", "ho", "--d", "16", "--out", str(out)]) == 0
    header, data = read_csv(out / "spectrum.csv")
    assert header == ["k", "energy"]
    np.testing.assert_allclose(data[:, 1], np.arange(16) * 16 / 15, atol=1e-12)
    meta = json.loads((out / "spectrum.json").read_text())
    assert meta["mean"] == pytest.approx(8.0) and meta["j"] == 7.5


def test_manifest_contents(tmp_path):
    out = tmp_path / "o"
    assert main(["widths", "--d", "8", "--n", "4", "--gamma", "2", "--nr", "3", "--out", str(out)]) == 0
    m = manifest(out)
    assert set(m) >= {"config", "version", "timing", "realizations", "failures", "outputs", "exit_status"}
    assert m["realizations"]["completed"] == 3 and m["realizations"]["errors"] == 0
    assert m["timing"]["wall_time_s"] >= 0
    assert RunConfig.from_raw({k: (",".join(map(str, v)) if isinstance(v, list) else v)
                               for k, v in m["config"].items()}).nr == 3
    header, _ = read_csv(out / "histogram.csv")
    assert header == ["log10_gamma_bin_center", "density"]


def test_numerical_failure_then_resume(tmp_path, monkeypatch):
    out = tmp_path / "o"
    argv = ["cumulants", "--d", "6", "--n", "2", "--eps", "1", "--gamma", "2", "--nr", "5", "--seed", "9",
            "--workers", "1", "--out", str(out)]
    original = cli.TASKS["cumulants"]

    def flaky(cfg, idx):
        if idx == 3:
            raise SolverError("forced", lam=cfg.lam, seed=cfg.seed, index=idx)
        return original(cfg, idx)

    monkeypatch.setitem(cli.TASKS, "cumulants", flaky)
    assert main(argv) == 2
    m = manifest(out)
    assert m["exit_status"] == 2 and m["realizations"]["errors"] == 1
    assert m["failures"][0]["index"] == 3 and m["failures"][0]["seed"] == 9
    monkeypatch.setitem(cli.TASKS, "cumulants", original)
    assert main(argv) == 0
    m = manifest(out)
    assert m["realizations"]["resumed"] == 4 and m["realizations"]["completed"] == 1
    fresh = tmp_path / "fresh"
    assert main(argv[:-1] + [str(fresh)]) == 0
    assert (out / "cumulants.json").read_bytes() == (fresh / "cumulants.json").read_bytes()


def test_changed_config_invalidates_parts(tmp_path):
    out = tmp_path / "o"
    base = ["cumulants", "--d", "6", "--n", "2", "--gamma", "2", "--nr", "3", "--out", str(out)]
    assert main(base) == 0
    assert main(base[:-2] + ["--seed", "5", "--out", str(out)]) == 0
    assert manifest(out)["realizations"]["resumed"] == 0


def test_ep_map_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["ep-map", "--model", "pt2", "--d", "6", "--n", "2", "--nr", "3", "--seed", "7", "--ep-bins", "20",
                 "--out", str(out)]) == 0
    header, data = read_csv(out / "ep.csv")
    assert header == ["realization", "re_lambda", "im_lambda", "residual_gap", "converged"]
    assert data.shape[0] == 3 * 16 and np.all(data[:, 4] == 1)
    meta = json.loads((out / "ep.density.json").read_text())
    assert meta["total"] == 48 and len(meta["re_centers"]) == 20
    h, dens = read_csv(out / "ep.density.csv")
    assert dens.shape == (20, 21) and h[0] == "re_center"


def test_scaling_and_contraction(tmp_path):
    out = tmp_path / "s"
    assert main(["scaling", "--d-list", "16,32", "--nr-list", "3,2", "--out", str(out)]) == 0
    header, data = read_csv(out / "ratio.csv")
    assert header == ["d", "ratio_mean", "ratio_std", "N_R"]
    assert data[:, 0].tolist() == [16, 32] and data[:, 3].tolist() == [3, 2]
    out = tmp_path / "c"
    assert main(["contraction", "--d", "16", "--n", "8", "--nr", "4", "--gamma", "0:10:3lin", "--out", str(out)]) == 0
    _, data = read_csv(out / "contraction.csv")
    assert data[0, 1] == pytest.approx(1.0)


def test_sweep_trajectories_schema(tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--d", "4", "--n", "2", "--nr", "2", "--gamma", "1e-1:1e1:7log", "--out", str(out)]) == 0
    header, data = read_csv(out / "trajectories.csv")
    assert header == ["realization", "kappa", "gamma", "energy", "width", "slope"]
    assert data.shape == (2 * 4 * 7, 6)


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "nhsr", "sweep", "--n", "0"], capture_output=True, text=True)
    assert r.returncode == 1 and "n" in r.stderr


def test_validate_direct():
    with pytest.raises(ConfigError):
        RunConfig("bogus").validate()
    assert RunConfig("two-level", eps=(0.3, 1.5)).validate().grid().points == 401
    assert math.isclose(RunConfig("widths", gamma="2", eps=(1.0,)).lam.imag, -2)
