import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gibbsids import cli
from gibbsids.config import KINDS, ConfigError, load_config, parse_config
from gibbsids.io import (
    ESTIMATOR_HEADER,
    read_csv,
    read_packings,
    read_samples,
    write_csv,
    write_packings,
    write_samples,
)
from gibbsids.packing import Ball, norm_u_S, Bump
from gibbsids.pointproc import BoxDomain
from gibbsids.sampler import sample_poisson_batch

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_POISSON = """
# quick Poisson IDS run
[experiment]
kind = poisson-ids
seed = 5

[potential]
shape = triangular
depth = 2
radius = 1

[geometry]
L = 8
h = 0.0625

[sampler]
replicas = 60

[grid]
lambdas = -3 -2.5 -2 -1.5   # inline comment
[fit]
tolerance_factor = 2
max_rel_ci = 5
"""

INTLEM = """
[experiment]
kind = intlem-scan
seed = 1
[intlem]
v = 1 2
edges = 0-1
eps = 0.5
t_min = 1
t_max = 50
t_num = 20
verify_points = 5
"""


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- file formats ------------------------------------------------------------------------------


def test_csv_roundtrip_and_dialect(tmp_path):
    p = write_csv(tmp_path / "x.csv", ESTIMATOR_HEADER,
                  [("log_laplace", 0.5, 0.1 + 0.2, 1e-300, np.float64(2.5), np.int64(7), None),
                   ("count_pmf", 3, True, False, -1.5, 10, 42)])
    raw = p.read_bytes()
    assert b"\r\n" not in raw
    header, rows = read_csv(p)
    assert tuple(header) == ESTIMATOR_HEADER
    assert float(rows[0][2]) == 0.1 + 0.2
    assert rows[0][6] == "" and rows[1][2] == "1"


def test_samples_roundtrip(tmp_path):
    dom = BoxDomain.centered(3.0, 2)
    b = sample_poisson_batch(dom, 1.0, 25, 1)
    p = write_samples(tmp_path / "s.txt", b)
    back = read_samples(p, dom)
    np.testing.assert_array_equal(back.sizes, b.sizes)
    np.testing.assert_allclose(back.coords, b.coords, atol=1e-12)
    (tmp_path / "bad.txt").write_text("2 0.1\n")
    with pytest.raises(ValueError):
        read_samples(tmp_path / "bad.txt", BoxDomain.centered(1.0, 1))


def test_packings_roundtrip(tmp_path):
    w = norm_u_S(Bump.cosine(), Ball(0.5), 1e-2).witness
    p = write_packings(tmp_path / "p.txt", [w, w])
    back = read_packings(p, 1)
    assert len(back) == 2
    np.testing.assert_allclose(back[0], w.points, atol=1e-12)


# --- configuration --------------------------------------------------------------------------------


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = load_config(path)
    assert cfg.kind in KINDS


def test_misspelled_key_is_rejected_with_its_path():
    bad = SMALL_POISSON.replace("[sampler]", "[sampler]\nburnin = 100")
    with pytest.raises(ConfigError, match="sampler.burnin"):
        parse_config(bad)


@pytest.mark.parametrize("edit,msg", [
    (lambda t: t.replace("seed = 5\n", ""), "experiment.seed"),
    (lambda t: t.replace("poisson-ids", "poisson"), "unknown experiment"),
    (lambda t: t.replace("h = 0.0625", "h = 0.25"), "geometry.h"),
    (lambda t: t.replace("replicas = 60", "replicas = many"), "sampler.replicas"),
    (lambda t: t + "[bogus]\nx = 1\n", "bogus"),
    (lambda t: t.replace("depth = 2", "depth = -2"), "potential.depth"),
])
def test_config_errors_name_the_key(edit, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(edit(SMALL_POISSON))


def test_config_values_and_hash_stability():
    cfg = parse_config(SMALL_POISSON)
    assert cfg["geometry.L"] == 8.0 and cfg["sampler.replicas"] == 60
    np.testing.assert_array_equal(cfg.lambdas(), [-3, -2.5, -2, -1.5])
    reordered = parse_config(SMALL_POISSON.replace("L = 8\nh = 0.0625", "h = 6.25e-2\nL = 8"))
    assert reordered.hash == cfg.hash
    assert cfg.with_seed(6).hash != cfg.hash
    assert cfg.with_seed(6).seed == 6 and cfg.seed == 5


def test_lambda_grid_by_range():
    cfg = parse_config(SMALL_POISSON.replace("lambdas = -3 -2.5 -2 -1.5   # inline comment",
                                             "lambda_min = -3\nlambda_max = -1\nlambda_num = 5"))
    np.testing.assert_allclose(cfg.lambdas(), [-3, -2.5, -2, -1.5, -1])


# --- command line --------------------------------------------------------------------------------------


def test_list_catalog(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "strauss-ids" in out and "intlem-scan" in out
    assert "required:" in out
    assert cli.list_experiments() == cli.list_experiments()
    for kind in KINDS:
        assert f"{kind}:" in out


def test_validate_command(tmp_path, capsys):
    assert cli.main(["validate", str(write(tmp_path, SMALL_POISSON))]) == 0
    assert "ok: poisson-ids" in capsys.readouterr().out
    assert cli.main(["validate", str(tmp_path / "missing.cfg")]) == 1


def test_run_misspelled_key_exit_1(tmp_path, capsys):
    p = write(tmp_path, SMALL_POISSON.replace("[sampler]", "[sampler]\nburnin = 100"))
    out = tmp_path / "out"
    assert cli.main(["run", str(p), "--out", str(out)]) == 1
    assert "sampler.burnin" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_run_poisson_outputs_manifest_and_determinism(tmp_path):
    p = write(tmp_path, SMALL_POISSON)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(p), "--out", str(a), "--jobs", "1"]) == 0
    assert cli.main(["run", str(p), "--out", str(b), "--jobs", "3"]) == 0
    cfg = parse_config(SMALL_POISSON)
    stem = f"poisson-ids__{cfg.hash}"
    assert (a / f"{stem}.csv").exists()
    assert (a / f"{stem}__pastur_fit.csv").exists()
    manifest = json.loads((a / f"{stem}__manifest.json").read_text())
    assert manifest["config_hash"] == cfg.hash and manifest["seed"] == 5
    listed = set(manifest["files"])
    assert all((a / f).exists() for f in listed)
    assert listed | {f"{stem}__manifest.json"} == {f.name for f in a.iterdir()}
    for f in listed:
        if f.endswith(".csv"):
            assert (a / f).read_bytes() == (b / f).read_bytes()
    header, rows = read_csv(a / f"{stem}.csv")
    assert header[:2] == ["lambda", "n_hat"]
    assert len(rows) == 4


def test_run_seed_override_and_env_default(tmp_path, monkeypatch):
    p = write(tmp_path, INTLEM)
    monkeypatch.setenv("GIBBSIDS_OUT", str(tmp_path / "env"))
    assert cli.main(["run", str(p), "--seed", "9"]) == 0
    files = list((tmp_path / "env").iterdir())
    h = parse_config(INTLEM).with_seed(9).hash
    assert any(f.name == f"intlem-scan__{h}.csv" for f in files)


def test_run_failing_certification_exit_2(tmp_path):
    p = write(tmp_path, SMALL_POISSON.replace("tolerance_factor = 2", "tolerance_factor = 1.0001"))
    out = tmp_path / "o"
    assert cli.main(["run", str(p), "--out", str(out)]) == 2
    summary = next(out.glob("*__summary.txt")).read_text()
    assert summary.startswith("[FAIL]")


def test_runtime_error_removes_partial_outputs(tmp_path, monkeypatch):
    from gibbsids import experiments

    def boom(cfg, jobs):
        raise RuntimeError("kaput")

    monkeypatch.setitem(experiments.RUNNERS, "intlem-scan", boom)
    out = tmp_path / "o"
    assert cli.main(["run", str(write(tmp_path, INTLEM)), "--out", str(out)]) == 1
    assert not any(out.iterdir())


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gibbsids.cli", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "norm-S" in r.stdout
