"""Command-line entry point: ``python3 -m varmetro <command> --config FILE``.

Commands
--------
fisher    spread of the sampled Tr[F^-1] against the number of events
optimize  variational search for measurement settings, with full traces
estimate  Bayesian estimation losses for null/random/variational/explicit settings
hom       two-photon overlap sweep: HOM curve plus estimation losses

Every output CSV starts with a ``# config_hash=... seed=... command=...``
line; :func:`varmetro.io.read_csv` parses them back.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    TrialRunner,
    exact_cost,
    fisher_statistics,
    hom_probabilities,
    posterior_shape,
    resolve_theta,
    variational_settings,
)
from .fisher import CRBReport, FisherMatrix, acquisitions_per_fim, analytic_fisher, circuit_fisher, device_qfi
from .io import write_csv, write_json
from .sampling import derive_seed, make_rng

log = logging.getLogger("varmetro")

OUT_ENV = "VARMETRO_OUT"
COMMANDS = ("fisher", "optimize", "estimate", "hom")


def _noise_cells(noise) -> list:
    return [noise.visibility, noise.phase_noise, noise.overlap]


NOISE_COLUMNS = ["visibility", "phase_noise", "overlap"]


def _qcrb(spec) -> float | None:
    try:
        return device_qfi(spec).trace_inverse()
    except (np.linalg.LinAlgError, ValueError):
        return None


def _report(f: FisherMatrix, qcrb, probes: int = 1) -> dict:
    try:
        tr = f.trace_inverse()
    except np.linalg.LinAlgError:
        tr = float("inf")
    return CRBReport(tr, f, probes, qcrb).to_dict()


# -- per-task workers (top level so they pickle) -----------------------------------

def _fisher_task(cfg: ExperimentConfig, ni: int, ti: int) -> dict:
    noise, trip = cfg.noises[ni], cfg.triplets[ti]
    seed = derive_seed(cfg.seed, ni, ti)
    spec = cfg.spec
    theta = np.array(cfg.fisher_theta or np.zeros(spec.parameter_count))
    qcrb = _qcrb(spec)
    rows, reports = [], []
    base = [trip.label] + _noise_cells(noise)
    if cfg.analytic:
        f = analytic_fisher(spec, trip.phi, theta, noise)
        rep = _report(f, qcrb)
        rows.append(base + ["exact", rep["trace_inverse"], 0.0, 0, 1, qcrb])
        reports.append({"label": trip.label, "events": "exact", **rep})
    else:
        for n in cfg.fisher_events:
            st = fisher_statistics(spec, trip.phi, theta, noise, n, cfg.repetitions, seed)
            rows.append(base + [n, st.mean, st.std, st.singular, cfg.repetitions, qcrb])
            first = circuit_fisher(spec, trip.phi, theta, noise, events=n, rng=make_rng(seed, n, 0))
            rep = _report(first, qcrb)
            if not rep["psd"]:
                log.warning("%s N=%d: sampled FIM is not PSD", trip.label, n)
            reports.append({"label": trip.label, "events": n, **rep})
    for r in reports:
        log.info("%s events=%s Tr[F^-1]=%.6g psd=%s", r["label"], r["events"],
                 r["trace_inverse"], r["psd"])
    return {"rows": {"fisher.csv": rows}, "reports": reports}


def _optimize_task(cfg: ExperimentConfig, ni: int, ti: int) -> dict:
    noise, trip = cfg.noises[ni], cfg.triplets[ti]
    seed = derive_seed(cfg.seed, ni, ti)
    spec = cfg.spec
    events = None if cfg.analytic else cfg.events
    theta, traces = variational_settings(spec, trip.phi, noise, cfg.optimizer, events, seed)
    per_fim = acquisitions_per_fim(spec)
    base = [trip.label] + _noise_cells(noise)
    trace_rows = []
    for r, tr in enumerate(traces):
        for step, rec in enumerate(tr.records):
            trace_rows.append(base + [r, step] + list(rec.point)
                              + [rec.cost, rec.kind, (step + 1) * per_fim])
    best = min(traces, key=lambda t: t.best_cost)
    start = np.array(cfg.optimizer.start)
    theta_row = base + list(theta) + [best.best_cost, exact_cost(spec, trip.phi, theta, noise),
                                      exact_cost(spec, trip.phi, start, noise)]
    return {"rows": {"optimize_traces.csv": trace_rows, "optimize_theta.csv": [theta_row]}}


def _estimate_task(cfg: ExperimentConfig, ni: int, ti: int, noises=None) -> dict:
    noises = noises or cfg.noises
    noise, trip = noises[ni], cfg.triplets[ti]
    seed = derive_seed(cfg.seed, ni, ti)
    spec = cfg.spec
    events = None if cfg.analytic else cfg.events
    explicit = None
    if cfg.explicit_theta is not None:
        explicit = cfg.explicit_theta.get(trip.label, cfg.explicit_theta.get("*"))
    base = [trip.label] + _noise_cells(noise)
    summary, losses, marginals = [], [], []
    for mode in cfg.modes:
        theta = resolve_theta(mode, spec, trip.phi, noise, seed, cfg.optimizer, events, explicit)
        runner = TrialRunner(spec, noise, trip.phi, theta, cfg.prior)
        results = runner.run(cfg.probes, cfg.repetitions, seed, cfg.estimator)
        loss = np.array([r.quadratic_loss for r in results])
        var = np.array([r.variance.sum() for r in results])
        shape = posterior_shape(results, np.asarray(trip.phi))
        summary.append(base + [mode] + list(theta) + [
            exact_cost(spec, trip.phi, theta, noise), loss.mean(),
            loss.std(ddof=1) if loss.size > 1 else 0.0, var.mean(), cfg.repetitions,
            shape.peak_height, shape.peak_offset,
        ])
        losses += [base + [mode, k, v] for k, v in enumerate(loss)]
        if cfg.marginals:
            for k, r in enumerate(results):
                for i in range(spec.parameter_count):
                    axis, w = r.posterior.marginal(i)
                    marginals += [base + [mode, k, i + 1, a, x] for a, x in zip(axis, w)]
    rows = {"summary.csv": summary, "losses.csv": losses}
    if cfg.marginals:
        rows["marginals.csv"] = marginals
    return {"rows": rows}


def _hom_noises(cfg: ExperimentConfig):
    return tuple(dataclasses.replace(n, overlap=ov) for n in cfg.noises for ov in cfg.overlaps)


def _hom_task(cfg: ExperimentConfig, ni: int, ti: int) -> dict:
    return _estimate_task(cfg, ni, ti, _hom_noises(cfg))


def _run_guarded(job):
    fn, cfg, ni, ti = job
    try:
        return True, fn(cfg, ni, ti)
    except Exception as exc:  # reported per task, the sweep carries on
        log.debug("task failed:\n%s", traceback.format_exc())
        return False, f"{type(exc).__name__}: {exc}"


# -- commands ---------------------------------------------------------------------------

def _columns(command: str, p: int) -> dict[str, list[str]]:
    base = ["label"] + NOISE_COLUMNS
    thetas = [f"theta_{i + 1}" for i in range(p)]
    est = {
        "summary.csv": base + ["mode"] + thetas + ["trace_inverse", "mean_loss", "std_loss",
                                                   "mean_variance", "repetitions",
                                                   "peak_height", "peak_offset"],
        "losses.csv": base + ["mode", "rep", "loss"],
        "marginals.csv": base + ["mode", "rep", "parameter", "phase", "weight"],
    }
    return {
        "fisher": {"fisher.csv": base + ["events", "mean_trace_inverse", "std_trace_inverse",
                                         "singular", "repetitions", "qcrb_trace_inverse"]},
        "optimize": {
            "optimize_traces.csv": base + ["restart", "step"] + thetas + ["cost", "kind",
                                                                         "acquisitions"],
            "optimize_theta.csv": base + thetas + ["best_cost", "exact_cost", "start_cost"],
        },
        "estimate": {f"estimate_{k}": v for k, v in est.items()},
        "hom": {f"hom_{k}": v for k, v in est.items()},
    }[command]


TASKS = {"fisher": _fisher_task, "optimize": _optimize_task,
         "estimate": _estimate_task, "hom": _hom_task}


def run_command(command: str, cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> dict:
    """Run one command and write its files; returns the JSON summary."""
    if command == "hom" and cfg.spec.photons != 2:
        raise ConfigError("hom needs a two-photon probe ([circuit] probe = two)")
    noises = _hom_noises(cfg) if command == "hom" else cfg.noises
    jobs_list = [(TASKS[command], cfg, ni, ti)
                 for ni in range(len(noises)) for ti in range(len(cfg.triplets))]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_guarded, jobs_list))
    else:
        outcomes = [_run_guarded(j) for j in jobs_list]

    meta = {"config_hash": cfg.config_hash(), "seed": cfg.seed, "command": command}
    columns = _columns(command, cfg.spec.parameter_count)
    rows = {name: [] for name in columns}
    failures, reports = [], []
    for (fn, _, ni, ti), (ok, result) in zip(jobs_list, outcomes):
        if not ok:
            failures.append({"label": cfg.triplets[ti].label, "noise_index": ni,
                             "seed": derive_seed(cfg.seed, ni, ti), "error": result})
            continue
        for name, rs in result["rows"].items():
            key = name if name in rows else f"{command}_{name}"
            rows[key].extend(rs)
        reports.extend(result.get("reports", []))

    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, cols in columns.items():
        if name.endswith("marginals.csv") and not cfg.marginals:
            continue
        files.append(str(write_csv(out_dir / name, cols, rows[name], meta).name))
    if command == "hom":
        curve = [[ov] + list(hom_probabilities(ov).values()) for ov in cfg.overlaps]
        for row in curve:
            row.append(row[1] / 0.5)
        files.append(str(write_csv(out_dir / "hom_curve.csv",
                                   ["overlap", "coincidence", "bunched_a", "bunched_b",
                                    "normalized_coincidence"], curve, meta).name))
    summary = {
        **meta,
        "device": cfg.device,
        "tasks": len(jobs_list),
        "completed": len(jobs_list) - len(failures),
        "failures": failures,
        "files": files,
    }
    if reports:
        summary["fisher_reports"] = reports
    write_json(out_dir / f"{command}_summary.json", summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varmetro", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file (defaults used when omitted)")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and [run] out)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--analytic", action="store_true",
                       help="use exact probabilities instead of sampled ones")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        if args.analytic:
            cfg = dataclasses.replace(cfg, analytic=True)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg.out or "results")
        summary = run_command(args.command, cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for f in summary["failures"]:
        print(f"failed: {f['label']} (noise #{f['noise_index']}, seed {f['seed']}): {f['error']}",
              file=sys.stderr)
    print(f"{summary['completed']}/{summary['tasks']} runs completed; outputs in {out}")
    return 0 if not summary["failures"] else 1


if __name__ == "__main__":
    sys.exit(main())
