import csv
import json

import numpy as np
import pytest

from tomograd.harness import cli
from tomograd.harness.experiments import (
    WALL_CLOCK_COLUMNS,
    BenchRecord,
    ExperimentSpec,
    build_tasks,
    default_spec,
    run_experiment,
)
from tomograd.io import read_density
from tomograd.measurement import DataSet, measure, pauli_set
from tomograd import qstates


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def strip_timing(rows):
    return [{k: v for k, v in r.items() if k not in WALL_CLOCK_COLUMNS} for r in rows]


def test_bench_time_two_qubits(tmp_path):
    code = cli.main(["bench-time", "--qubit-list", "2", "--trials", "5", "--methods", "cd", "--out-dir", str(tmp_path)])
    assert code == 0
    rows = read_rows(tmp_path / "bench-time_cd.csv")
    assert list(rows[0]) == [f.name for f in BenchRecord.__dataclass_fields__.values()]
    assert [int(r["trial"]) for r in rows] == list(range(5))
    assert all(float(r["fidelity"]) >= 0.99 for r in rows)
    assert all(r["status"] == "ok" for r in rows)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["spec"]["experiment"] == "bench-time"
    assert manifest["spec"]["fidelity_target"] == 0.99
    assert manifest["errors"] == 0


def test_rerun_and_parallel_reproduce_csvs(tmp_path):
    args = ["bench-rank", "--qubits", "2", "--target-ranks", "1,4", "--ansatz-ranks", "1,4",
            "--trials", "2", "--methods", "cd,sm,pn", "--max-iters", "150"]
    assert cli.main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out-dir", str(tmp_path / "b"), "--workers", "2"]) == 0
    for method in ("cd", "sm", "pn"):
        a = strip_timing(read_rows(tmp_path / "a" / f"bench-rank_{method}.csv"))
        b = strip_timing(read_rows(tmp_path / "b" / f"bench-rank_{method}.csv"))
        assert a == b and len(a) == 8


def test_bench_noise_zero_matches_noiseless(tmp_path):
    spec = default_spec("bench-noise", state={"qubits": 2}, levels=[0.0], trials=2, methods=["cd"],
                        out_dir=str(tmp_path / "n"))
    noisy = run_experiment(spec)
    plain = run_experiment(default_spec("reconstruct", state={"type": "pure", "qubits": 2}, rank=1, trials=2,
                                        methods=["cd"], out_dir=str(tmp_path / "r")))
    for a, b in zip(noisy, plain):
        assert abs(a.fidelity - b.fidelity) < 1e-9


def test_gaussian_noise_sweep_and_linear_inversion(tmp_path):
    spec = default_spec("bench-noise", state={"qubits": 2}, levels=[0.0, 0.04], noise="gaussian", trials=2,
                        methods=["cd", "linear-inversion"], out_dir=str(tmp_path))
    recs = run_experiment(spec)
    assert len(recs) == 8 and all(r.status == "ok" for r in recs)
    li = [r for r in recs if r.method == "linear-inversion"]
    assert all(r.fidelity is not None for r in li)
    summary = read_rows(tmp_path / "bench-noise_summary.csv")
    assert {r["noise_level"] for r in summary} == {"0.0", "0.04"}


def test_bench_data_sizes(tmp_path):
    spec = default_spec("bench-data", state={"type": "ghz", "qubits": 3}, sizes=[20, 64], trials=3,
                        methods=["cd"], max_iters=100, out_dir=str(tmp_path))
    recs = run_experiment(spec)
    assert [r.data_size for r in recs] == [20, 20, 20, 64, 64, 64]
    assert recs[3].fidelity > 0.99


def test_sweep_hyper_grid(tmp_path):
    spec = default_spec("sweep-hyper", state={"qubits": 2}, batch_sizes=[4, 16], step_sizes=[0.1, 1.0],
                        trials=1, max_iters=50, out_dir=str(tmp_path))
    recs = run_experiment(spec)
    assert [(r.batch_size, r.eta0) for r in recs] == [(4, 0.1), (4, 1.0), (16, 0.1), (16, 1.0)]


def test_cv_cat_small_writes_traces_and_wigner(tmp_path):
    spec = default_spec("cv-cat", state={"xi": 1.0, "dim": 10}, husimi_steps=12, wigner_steps=9,
                        max_iters=200, out_dir=str(tmp_path))
    recs = run_experiment(spec)
    assert [r.method for r in recs] == ["cd", "sm", "pn", "imle"]
    assert all(r.status == "ok" for r in recs)
    for m in ("cd", "sm", "pn", "imle"):
        rows = read_rows(tmp_path / "traces" / f"{m}_trial0.csv")
        assert list(rows[0]) == ["iter", "cum_time_s", "loss", "fidelity"]
        qstates.check_density(read_density(tmp_path / "rho" / f"{m}_trial0.txt"))
        assert len(read_rows(tmp_path / "wigner" / f"{m}_trial0.csv")) == 81
    assert (tmp_path / "wigner" / "truth_trial0.csv").exists()


def test_reconstruct_from_files(tmp_path):
    obs = pauli_set(2)
    truth = qstates.random_density(4, 4, 3)
    measure(truth, obs).to_csv(tmp_path / "data.csv")
    from tomograd.io import write_density

    write_density(truth, tmp_path / "truth.txt")
    code = cli.main(["reconstruct", "--qubits", "2", "--data", str(tmp_path / "data.csv"), "--truth",
                     str(tmp_path / "truth.txt"), "--trials", "1", "--methods", "cd,linear-inversion",
                     "--out-dir", str(tmp_path / "out")])
    assert code == 0
    rows = read_rows(tmp_path / "out" / "reconstruct_linear-inversion.csv")
    assert float(rows[0]["fidelity"]) == pytest.approx(1.0)
    assert not (tmp_path / "out" / "rho" / "linear-inversion_trial0.txt").exists() or qstates.is_density(
        read_density(tmp_path / "out" / "rho" / "linear-inversion_trial0.txt")
    )


def test_failed_trial_recorded_and_exit_code(tmp_path):
    DataSet([0, 99], [1.0, 0.0]).to_csv(tmp_path / "bad.csv")
    code = cli.main(["reconstruct", "--qubits", "1", "--data", str(tmp_path / "bad.csv"), "--trials", "1",
                     "--methods", "cd,sm", "--out-dir", str(tmp_path / "out")])
    assert code == 1
    rows = read_rows(tmp_path / "out" / "reconstruct_cd.csv")
    assert rows[0]["status"].startswith("error")
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["errors"] == 2


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("trials: 3\nmax_iters: 17\nstate:\n  qubits: 1\n  type: pure\nmethods: [sm]\n")
    args = cli.build_parser().parse_args(["reconstruct", "--config", str(cfg), "--max-iters", "9", "--out-dir", "x"])
    spec = cli.spec_from_args(args)
    assert spec.trials == 3 and spec.max_iters == 9 and spec.methods == ["sm"]
    assert spec.state.type == "pure" and spec.state.qubits == 1
    jcfg = tmp_path / "c.json"
    jcfg.write_text(json.dumps({"lambda_l1": 0.1, "bogus": 1}))
    assert cli.main(["reconstruct", "--config", str(jcfg)]) == 2


def test_per_method_override_flag():
    args = cli.build_parser().parse_args(
        ["cv-cat", "--override", "pn.eta0=0.5", "--override", "imle.max_iters=7", "--out-dir", "x"]
    )
    spec = cli.spec_from_args(args)
    assert spec.run_config("pn").eta0 == 0.5
    assert spec.run_config("imle").max_iters == 7
    assert spec.run_config("sm").eta0 == 0.1  # built-in cv-cat override kept
    # a global flag wins over built-in per-method defaults
    spec = cli.spec_from_args(cli.build_parser().parse_args(["cv-cat", "--eta0", "0.2"]))
    assert spec.run_config("cd").eta0 == 0.2 and spec.run_config("pn").eta0 == 0.2
    assert cli.main(["cv-cat", "--override", "pn.bogus=1"]) == 2
    assert cli.main(["cv-cat", "--override", "noequals"]) == 2


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(trials=0).validate()
    with pytest.raises(ValueError):
        ExperimentSpec(methods=[]).validate()
    with pytest.raises(ValueError):
        ExperimentSpec(methods=["cgan"]).validate()


def test_trial_seeds_distinct_and_stable():
    spec = default_spec("reconstruct", trials=4)
    seeds = [t.seed for t in build_tasks(spec)]
    assert len(set(seeds)) == 4
    assert seeds == [t.seed for t in build_tasks(default_spec("reconstruct", trials=4))]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        run_experiment(default_spec("reconstruct", trials=1, out_dir=str(blocker / "sub")))
