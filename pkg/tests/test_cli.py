import os

import numpy as np
import pytest

from aeromec.cli import main
from aeromec.config import save_config
from aeromec.geometry import make_slot_context
from aeromec.mission import load_manifest_config
from aeromec.sca import stage_a_point
from aeromec.subproblem import SlotProgramFactory
from conftest import tiny_config


@pytest.fixture(scope="module")
def tiny_yaml(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    save_config(tiny_config(), str(path))
    return str(path)


def test_plan_smoke(tmp_path, tiny_yaml):
    out = tmp_path / "run"
    rc = main(["plan", "--config", tiny_yaml, "--out", str(out), "--profile", "ci"])
    assert rc == 0
    names = set(os.listdir(out))
    assert {"trajectory.csv", "energy.csv", "trace.csv", "manifest.json"} <= names


def test_plan_malformed_config(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid_nx: -2\n")
    out = tmp_path / "run"
    rc = main(["plan", "--config", str(bad), "--out", str(out)])
    assert rc == 2
    assert not out.exists()


def test_plan_infeasible_returns_3(tmp_path):
    cfg = tiny_config(eve_xy_m=np.array([(0.0, 20.0)]), sinr_leak_linear=1e-6)
    path = tmp_path / "cfg.yaml"
    save_config(cfg, str(path))
    out = tmp_path / "run"
    rc = main(["plan", "--config", str(path), "--out", str(out), "--profile", "ci"])
    assert rc == 3
    assert (out / "manifest.json").exists()  # partial outputs are kept


def test_sweep_empty_values(tmp_path, tiny_yaml):
    rc = main(["sweep", "--config", tiny_yaml, "--out", str(tmp_path / "o"),
               "--parameter", "task_bits", "--values", ""])
    assert rc == 2


def test_evaluate_unknown_experiment(tmp_path, tiny_yaml):
    out = tmp_path / "run"
    main(["plan", "--config", tiny_yaml, "--out", str(out), "--profile", "ci"])
    rc = main(["evaluate", "--mission", str(out), "--out", str(tmp_path / "ev"),
               "--experiment", "bogus"])
    assert rc == 2


def test_evaluate_mc_seed_invariance_of_robust_design(tmp_path, tiny_yaml):
    out = tmp_path / "run"
    main(["plan", "--config", tiny_yaml, "--out", str(out), "--profile", "ci"])
    for seed in (1, 2):
        rc = main(["evaluate", "--mission", str(out), "--out", str(tmp_path / f"ev{seed}"),
                   "--experiment", "mc", "--trials", "100", "--seed", str(seed),
                   "--profile", "ci"])
        assert rc == 0
        text = (tmp_path / f"ev{seed}" / "ratios.csv").read_text()
        ratios = [float(line.split(",")[1]) for line in text.splitlines()[1:]]
        assert all(r == 1.0 for r in ratios)


def test_unknown_preset_rejected():
    with pytest.raises(SystemExit):
        main(["presets", "fig99", "--out", "/tmp/x"])


def test_manifest_reload_reproduces_program_structure(tmp_path, tiny_yaml):
    out = tmp_path / "run"
    main(["plan", "--config", tiny_yaml, "--out", str(out), "--profile", "ci"])
    cfg2 = load_manifest_config(str(out))
    cfg1 = tiny_config()
    hashes = []
    for cfg in (cfg1, cfg2):
        ctx = make_slot_context(cfg, 1, cfg.q_start_m)
        pt = stage_a_point(ctx, cfg)
        fac = SlotProgramFactory(ctx, cfg, precond_point=pt)
        hashes.append(fac.program_at(pt.to_linearization()).structural_hash())
    assert hashes[0] == hashes[1]
