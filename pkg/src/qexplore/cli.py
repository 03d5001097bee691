"""Batch entry point: ``qexplore <subcommand> [--config FILE] [--set key=value ...]``.

Every run writes its CSV outputs plus ``manifest.json`` to ``--out``.  Failures
print one JSON object to stderr and exit nonzero: 2 for config errors, 3 for
a non-positive action penalty, 4 for failed verification, 1 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import subprocess
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import continuous, qlearn, sim
from .bsdelta import solve
from .errors import ConfigError, ConvexityViolation, DegenerateParameters, QExploreError
from .filtering import sigma_sequence
from .policy import ExploratoryPolicy, verify_pointwise_optimality
from .qgaussian import QGaussian

COMMANDS = ("solve", "simulate", "converge", "approx", "qlearn", "verify")

EXIT_CONFIG, EXIT_CONVEXITY, EXIT_VERIFY = 2, 3, 4


class VerificationFailed(QExploreError):
    pass


def _r(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def cmd_solve(rc: cfgmod.RunConfig, out: Path) -> list[Path]:
    """``h2``, ``phi``, penalty and filter variance per grid, with closed forms where defined."""
    m = rc.model
    paths = []
    try:
        closed = m.closed_form()
        continuous.h1_coefficient(m.T, closed, m.kappa)
    except (DegenerateParameters, QExploreError):
        closed = None
    for N in rc.experiment.N:
        coeffs = m.coefficients(N)
        sol = solve(coeffs, m.kappa)
        t = np.linspace(0.0, m.T, N + 1)
        Sigma = sigma_sequence(m.ou(), coeffs.dt, N)
        if closed is not None:
            h2c = np.atleast_1d(continuous.h2_closed(t, closed))
            phic = np.atleast_1d(continuous.h1_coefficient(t, closed, m.kappa))
        rows = []
        for n in range(N + 1):
            qf = _r(sol.qfactor[n]) if n < N else ""
            extra = [_r(h2c[n]), _r(phic[n])] if closed is not None else ["", ""]
            rows.append([n, _r(t[n]), _r(sol.h2[n]), _r(sol.phi[n]), qf, _r(Sigma[n]), *extra])
        paths.append(_write_rows(out / f"solve_N{N}.csv",
                                 ("n", "t", "h2", "phi", "qfactor", "Sigma", "h2_closed", "phi_closed"), rows))
    return paths


def cmd_simulate(rc, out):
    batches = sim.simulate_paths(rc.experiment_config())
    return [sim.write_paths_csv(batches, out / "paths.csv")]


def cmd_converge(rc, out):
    res = sim.convergence_study(rc.experiment_config())
    return [sim.write_summary_csv(res.rows, out / "converge_summary.csv")]


def cmd_approx(rc, out):
    res = sim.approximation_study(rc.experiment_config())
    return [sim.write_approx_csv(res, out / "approx.csv")]


def _mdp(qc: cfgmod.QLearnConfig) -> qlearn.TabularMDP:
    if qc.mdp:
        return qlearn.read_mdp(qc.mdp)
    return qlearn.TabularMDP.random(np.random.default_rng(qc.mdp_seed), qc.n_states, qc.n_actions, qc.zeta)


def cmd_qlearn(rc, out):
    qc = rc.qlearn
    table = qlearn.soft_value_iteration(_mdp(qc), qc.q, qc.lam, qc.tol, qc.max_iters)
    report = qlearn.policy_entropy_report(table, qc.q, qc.lam)
    return [qlearn.write_table_csv(table, qc.q, qc.lam, out / "qtable.csv"),
            qlearn.write_report_csv(report, out / "qreport.csv")]


def cmd_verify(rc, out):
    """Density normalisation and pointwise optimality at random states."""
    m, vc, e = rc.model, rc.verify, rc.experiment
    rng = np.random.default_rng(e.seed)
    rows, failed = [], []
    for q in vc.q:
        for lam in e.lam:
            mass = QGaussian.from_penalty(q, 0.0, lam, m.K).total_mass()
            ok = abs(mass - 1.0) < 1e-8
            rows.append(["normalisation", _r(q), _r(lam), "", "", "", _r(mass - 1.0), int(ok)])
            failed += [] if ok else [f"normalisation q={q} lam={lam}"]
    N = e.N[0]
    coeffs = m.coefficients(N)
    sol = solve(coeffs, m.kappa)
    for q in vc.q:
        for lam in e.lam:
            pol = ExploratoryPolicy.discrete(coeffs, q, lam, m.kappa, solution=sol)
            for k in range(vc.points):
                n = int(rng.integers(N))
                x, a_hat = rng.normal(0.0, 2.0, size=2)
                rep = verify_pointwise_optimality(pol, n, x, a_hat, vc.candidates, vc.nodes, seed=k)
                ok = rep.margin > 0
                rows.append(["optimality", _r(q), _r(lam), n, _r(x), _r(a_hat), _r(rep.margin), int(ok)])
                failed += [] if ok else [f"optimality q={q} lam={lam} n={n}"]
    path = _write_rows(out / "verify.csv", ("check", "q", "lambda", "n", "x", "a_hat", "value", "passed"), rows)
    if failed:
        raise VerificationFailed(f"{len(failed)} checks failed, first: {failed[0]}")
    return [path]


HANDLERS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "approx": cmd_approx,
    "qlearn": cmd_qlearn,
    "verify": cmd_verify,
}


def version_string() -> str:
    """``git describe``-style version, falling back to the installed package version."""
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = "0.0.0"
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                              text=True, cwd=Path(__file__).resolve().parent, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"v{base}-g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{base}"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qexplore", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="TOML config or a previous manifest.json")
    ap.add_argument("--seed", type=int, help="experiment seed (unsigned 64-bit)")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--threads", type=int, help="worker threads for path simulation")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key, e.g. experiment.n_paths=500 (repeatable)")
    return ap


def _error(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer", field="experiment.seed")
            overrides.append(f"experiment.seed={args.seed}")
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be at least 1", field="experiment.threads")
            overrides.append(f"experiment.threads={args.threads}")
        rc = cfgmod.load(args.config, overrides)
        t_cfg = time.perf_counter()
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = HANDLERS[args.command](rc, args.out)
        t_run = time.perf_counter()
    except ConfigError as exc:
        _error("ConfigError", str(exc), field=exc.field)
        return EXIT_CONFIG
    except ConvexityViolation as exc:
        _error("ConvexityViolation", str(exc), n=exc.n)
        return EXIT_CONVEXITY
    except VerificationFailed as exc:
        _error("VerificationFailed", str(exc))
        return EXIT_VERIFY
    except (QExploreError, ValueError, OSError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    manifest = {
        "command": args.command,
        "config": rc.to_dict(),
        "config_hash": rc.config_hash(),
        "seed": rc.experiment.seed,
        "version": version_string(),
        "outputs": {p.name: sha256_file(p) for p in outputs},
        "timings": {"config_s": t_cfg - t0, "run_s": t_run - t_cfg},
    }
    (args.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"command": args.command, "outputs": sorted(manifest["outputs"]),
                      "config_hash": manifest["config_hash"]}))
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))

