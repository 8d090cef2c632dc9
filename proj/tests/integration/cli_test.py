#!/usr/bin/env python3
"""End-to-end checks of the adlab command line.

Usage: cli_test.py ADLAB_BINARY
"""
import csv
import json
import math
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

ADLAB = sys.argv[1]
failures = []


def check(cond, label):
    print(("PASS " if cond else "FAIL ") + label)
    if not cond:
        failures.append(label)


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("ADAPTIVE_LAB_WORKERS", None)
    if env:
        full_env.update(env)
    return subprocess.run([ADLAB, *args], capture_output=True, text=True, env=full_env)


def load_traj(path):
    with open(path) as fh:
        header = fh.readline().split()
        dim = int(next(h for h in header if h.startswith("d="))[2:])
        rows = np.array([[float(x) for x in line.split(",")] for line in fh if line.strip()])
    return rows[:, 2 : 2 + dim], rows[:, 2 + dim]


def one_step(X, y, nu, lam_h, lam_a):
    T, d = X.shape
    gram = X.T @ X / T
    beta = np.linalg.solve(gram + lam_h * np.eye(d), X.T @ y / T)
    w = np.linalg.solve(gram + lam_a * np.eye(d), nu)
    alpha, resid = X @ w, y - X @ beta
    return nu @ beta + np.mean(alpha * resid), math.sqrt(np.sum(alpha**2 * resid**2)) / T


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    sphere = ["--set", "env.features=unit_sphere", "--set", "env.arms=5", "--set", "experiment.dims=3",
              "--set", "experiment.horizons=250", "--set", "policy.kind=linucb", "--set", "simulate.replications=3",
              "--set", "target.rule=fixed", "--set", "target.nu=1,-0.5,2", "--seed", "99"]

    # determinism: two simulate runs give identical files
    a, b = tmp / "sim_a", tmp / "sim_b"
    ra = run("simulate", *sphere, "--out", str(a), "--quiet")
    rb = run("simulate", *sphere, "--out", str(b), "--quiet", "--workers", "3")
    check(ra.returncode == 0 and rb.returncode == 0, "simulate exits 0")
    names = sorted(p.name for p in a.iterdir() if p.name != "manifest.json")
    same = names == sorted(p.name for p in b.iterdir() if p.name != "manifest.json") and all(
        (a / n).read_bytes() == (b / n).read_bytes() for n in names)
    check(same and len(names) == 4, "simulate output is byte-identical across runs and worker counts")

    # manifest fields
    man = json.loads((a / "manifest.json").read_text())
    check(man["master_seed"] == 99 and man["version"] and man["simd_backend"] in ("scalar", "avx2", "neon")
          and "[env]" in man["config"] and "policy.kind=linucb" in man["overrides"], "manifest records config, seed, version, backend")

    # estimate agrees with an independent numpy recomputation
    trajs = sorted(str(a / n) for n in names if n.startswith("traj_"))
    out = tmp / "est"
    r = run("estimate", *trajs, "--truth", str(a / "truth_c0.txt"), "--lambda-h", "0.01", "--lambda-alpha", "1/T",
            "--out", str(out), "--quiet")
    check(r.returncode == 0, "estimate exits 0")
    rows = read_csv(out / "estimates.csv")
    nu = np.array([1.0, -0.5, 2.0])
    worst = 0.0
    for path, row in zip(trajs, rows):
        X, y = load_traj(path)
        psi, se = one_step(X, y, nu, 0.01, 1.0 / len(y))
        worst = max(worst, abs(psi - float(row["psi_hat"])) / max(1.0, abs(psi)),
                    abs(se - float(row["se"])) / se)
    check(len(rows) == 3 and worst < 1e-10, f"estimate matches numpy one-step (max rel err {worst:.2e})")

    # sigma = 0 recovers the truth
    quiet_dir, quiet_est = tmp / "quiet", tmp / "quiet_est"
    run("simulate", *sphere, "--set", "env.sigma=0", "--out", str(quiet_dir), "--quiet")
    qtraj = sorted(str(p) for p in quiet_dir.glob("traj_*.csv"))
    r = run("estimate", *qtraj, "--truth", str(quiet_dir / "truth_c0.txt"), "--lambda-h", "0",
            "--lambda-alpha", "0", "--out", str(quiet_est), "--quiet")
    truth = float(next(l.split("=")[1] for l in (quiet_dir / "truth_c0.txt").read_text().splitlines()
                       if l.startswith("truth")))
    errs = [abs(float(row["psi_hat"]) - truth) for row in read_csv(quiet_est / "estimates.csv")]
    check(r.returncode == 0 and len(errs) == 3 and max(errs) <= 1e-8, "noiseless estimate equals the truth")

    # simulate -> estimate matches the in-process coverage path
    cov = tmp / "cov"
    r = run("coverage", *sphere, "--set", "experiment.replications=3", "--set", "estimator.lambda_h=d/T",
            "--out", str(cov), "--quiet")
    recs = read_csv(cov / "records.csv")
    est2 = tmp / "est2"
    r2 = run("estimate", *trajs, "--truth", str(a / "truth_c0.txt"), "--lambda-h", "d/T", "--out", str(est2), "--quiet")
    file_rows = read_csv(est2 / "estimates.csv")
    match = r.returncode == 0 and r2.returncode == 0 and len(recs) == 3 and all(
        rec["psi_hat"] == fr["psi_hat"] and rec["se"] == fr["se"] for rec, fr in zip(recs, file_rows))
    check(match, "file round trip reproduces in-process estimates exactly")

    # diagnose runs on stored files
    r = run("diagnose", *trajs, "--truth", str(a / "truth_c0.txt"), "--out", str(tmp / "diag"), "--quiet")
    check(r.returncode == 0 and len(read_csv(tmp / "diag" / "stability.csv")) == 3, "diagnose writes one row per trajectory")

    # worker count from the environment lands in the manifest
    r = run("coverage", *sphere, "--set", "experiment.replications=4", "--out", str(tmp / "cov_env"), "--quiet",
            env={"ADAPTIVE_LAB_WORKERS": "2"})
    man = json.loads((tmp / "cov_env" / "manifest.json").read_text())
    check(r.returncode == 0 and man["workers"] == 2, "ADAPTIVE_LAB_WORKERS sets the worker count")

    # exit codes
    r = run("coverage", "--set", "env.no_such_key=1", "--out", str(tmp / "x"))
    check(r.returncode == 2, f"unknown config key exits 2 (got {r.returncode})")
    r = run("coverage", "--set", "env.sigma=-1", "--out", str(tmp / "x"))
    check(r.returncode == 2, f"invalid config value exits 2 (got {r.returncode})")
    bad = tmp / "bad.csv"
    bad.write_text("adlab-trajectory v1 T=2 d=1\n1,0,1,oops,1\n")
    r = run("estimate", str(bad), "--out", str(tmp / "x"))
    check(r.returncode == 3, f"malformed trajectory exits 3 (got {r.returncode})")
    r = run("diagnose", trajs[0], "--truth", str(bad), "--out", str(tmp / "x"))
    check(r.returncode == 3, f"malformed truth file exits 3 (got {r.returncode})")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
