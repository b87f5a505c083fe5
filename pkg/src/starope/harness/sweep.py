"""Resumable (|Z|, c) sweeps.

Layout of ``out_dir``::

    config.json          resolved SweepConfig
    truth.json           oracle value (DP or Monte Carlo)
    blocks/n{n}_t{trial}.csv       one file per (n, trial), written atomically
    blocks/n{n}_t{trial}.fail.csv  estimator failures for that block, if any
    trials.csv  summary.csv  selection.csv  heatmap_n{n}.csv
    figures/heatmap_n{n}.svg  figures/compare_n{n}.svg
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import SweepConfig
from .report import (
    read_failures,
    read_trials,
    summarize,
    write_failures,
    write_heatmap,
    write_selection,
    write_summary,
    write_trials,
)
from .trials import Truth, compute_truth, run_block

log = logging.getLogger(__name__)


def _dump_json(path: Path, obj) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_truth(config: SweepConfig, out: Path) -> Truth:
    path = out / "truth.json"
    if path.exists():
        raw = json.loads(path.read_text())
        if raw.get("env") == config.env and raw.get("evaluation") == config.evaluation:
            return Truth(raw["value"], raw["stderr"], raw["method"])
    truth = compute_truth(config)
    _dump_json(path, {"env": config.env, "evaluation": config.evaluation, "value": truth.value,
                      "stderr": truth.stderr, "method": truth.method})
    return truth


def _block_path(out: Path, n: int, trial: int) -> Path:
    return out / "blocks" / f"n{n}_t{trial:04d}.csv"


def _run_and_write(config: SweepConfig, n: int, trial: int, truth: float) -> tuple[int, int]:
    results, failures = run_block(config, n, trial, truth)
    path = _block_path(Path(config.out_dir), n, trial)
    fail = path.with_suffix(".fail.csv")
    if failures:
        write_failures(fail, failures)
    elif fail.exists():
        fail.unlink()
    write_trials(path, results)  # last: its existence marks the block complete
    return n, trial


# Fields that change block contents; sizes and trials may grow between runs.
RESULT_FIELDS = ("env", "behavior", "evaluation", "seed", "num_abstract", "clip", "baselines",
                 "standardize", "kmeans_max_iters", "kmeans_tol", "truth_episodes")


def _check_resume(config: SweepConfig, out: Path) -> None:
    path = out / "config.json"
    if not path.exists():
        return
    old = json.loads(path.read_text())
    new = json.loads(json.dumps(config.to_dict()))
    changed = [k for k in RESULT_FIELDS if old.get(k) != new[k]]
    if changed:
        raise ValueError(f"{out} holds a sweep with different {', '.join(changed)}; "
                         "use a fresh output directory")


def run_sweep(config: SweepConfig) -> dict:
    """Run every missing (n, trial) block, then rebuild all reports from disk."""
    out = Path(config.out_dir)
    (out / "blocks").mkdir(parents=True, exist_ok=True)
    _check_resume(config, out)
    _dump_json(out / "config.json", config.to_dict())
    truth = load_truth(config, out)

    todo = [(n, t) for n in config.sizes for t in range(config.trials)
            if not _block_path(out, n, t).exists()]
    log.info("sweep %s: %d blocks to run, %d already done", out, len(todo),
             len(config.sizes) * config.trials - len(todo))
    if config.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futs = [pool.submit(_run_and_write, config, n, t, truth.value) for n, t in todo]
            for f in futs:
                f.result()
    else:
        for n, t in todo:
            _run_and_write(config, n, t, truth.value)
    return write_reports(config, out)


def collect(config: SweepConfig, out: Path):
    results, failures = [], []
    for n in config.sizes:
        for t in range(config.trials):
            path = _block_path(out, n, t)
            results.extend(read_trials(path))
            fail = path.with_suffix(".fail.csv")
            if fail.exists():
                failures.extend(read_failures(fail))
    return results, failures


def write_reports(config: SweepConfig, out: Path) -> dict:
    results, failures = collect(config, out)
    paths = {"trials": out / "trials.csv", "summary": out / "summary.csv",
             "selection": out / "selection.csv"}
    write_trials(paths["trials"], results)
    if failures:
        paths["failures"] = out / "failures.csv"
        write_failures(paths["failures"], failures)
    paths.update(write_summaries(results, out, config.sizes, figures=config.figures))
    return paths


def write_summaries(results, out: Path, sizes=None, figures: bool = True) -> dict:
    """summary.csv, selection.csv and per-n heatmaps (plus SVGs) from trial results."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = summarize(results)
    paths = {"summary": out / "summary.csv", "selection": out / "selection.csv"}
    write_summary(paths["summary"], rows)
    write_selection(paths["selection"], rows)
    sizes = sorted({s.n for s in rows}) if sizes is None else sizes
    for n in sizes:
        if any(s.estimator == "star" and s.n == n for s in rows):
            p = out / f"heatmap_n{n}.csv"
            write_heatmap(p, rows, n)
            paths[f"heatmap_n{n}"] = p
    if figures:
        from .plotting import plot_comparison, plot_heatmap

        figdir = out / "figures"
        figdir.mkdir(exist_ok=True)
        for n in sizes:
            if plot_heatmap(rows, n, figdir / f"heatmap_n{n}.svg"):
                paths[f"fig_heatmap_n{n}"] = figdir / f"heatmap_n{n}.svg"
            if plot_comparison(rows, n, figdir / f"compare_n{n}.svg"):
                paths[f"fig_compare_n{n}"] = figdir / f"compare_n{n}.svg"
    return paths
