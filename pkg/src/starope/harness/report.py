"""Trial/summary CSV files, bias-variance summaries and heatmap tables."""

from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from ..env.data import fmt
from .trials import TrialFailure, TrialResult

TRIAL_COLUMNS = ["estimator", "num_abstract", "clip_c", "n", "trial", "seed", "estimate", "truth", "sq_error"]
SUMMARY_COLUMNS = ["estimator", "num_abstract", "clip_c", "n", "trials", "mse", "bias", "variance", "stderr"]
SELECTION_COLUMNS = ["n", "selection"] + SUMMARY_COLUMNS
FAILURE_COLUMNS = ["estimator", "num_abstract", "clip_c", "n", "trial", "error"]

ESTIMATOR_ORDER = {"star": 0, "is": 1, "pdis": 2, "wis": 3, "wpdis": 4, "mbased": 5}


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    num_abstract: int | None
    clip_c: int | None
    n: int
    trials: int
    mse: float
    bias: float
    variance: float
    stderr: float

    @property
    def key(self):
        return (self.estimator, self.num_abstract, self.clip_c, self.n)


def sort_key(key):
    est, k, c, n = key[:4]
    return (ESTIMATOR_ORDER.get(est, 99), est, n, -1 if k is None else k,
            math.inf if c is None else c) + tuple(key[4:])


# -- encoding ---------------------------------------------------------------

def _enc_k(k):
    return "" if k is None else str(k)


def _enc_c(est, c):
    if c is None:
        return "unclipped" if est == "star" else ""
    return str(c)


def _dec_int(s):
    return None if s in ("", "unclipped") else int(s)


def _write(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)


def trial_row(r: TrialResult):
    return [r.estimator, _enc_k(r.num_abstract), _enc_c(r.estimator, r.clip_c), r.n, r.trial,
            r.seed, fmt(r.estimate), fmt(r.truth), fmt(r.sq_error)]


def write_trials(path, results) -> None:
    rows = sorted(results, key=lambda r: sort_key(r.key + (r.trial,)))
    _write(path, TRIAL_COLUMNS, [trial_row(r) for r in rows])


def read_trials(path) -> list[TrialResult]:
    with open(path, newline="") as f:
        rd = csv.DictReader(f)
        if rd.fieldnames != TRIAL_COLUMNS:
            raise ValueError(f"{path}: expected columns {TRIAL_COLUMNS}")
        return [TrialResult(row["estimator"], _dec_int(row["num_abstract"]), _dec_int(row["clip_c"]),
                            int(row["n"]), int(row["trial"]), int(row["seed"]), float(row["estimate"]),
                            float(row["truth"]), float(row["sq_error"])) for row in rd]


def write_failures(path, failures) -> None:
    _write(path, FAILURE_COLUMNS, [[f.estimator, _enc_k(f.num_abstract), _enc_c(f.estimator, f.clip_c),
                                    f.n, f.trial, f.error] for f in failures])


def read_failures(path) -> list[TrialFailure]:
    with open(path, newline="") as f:
        return [TrialFailure(r["estimator"], _dec_int(r["num_abstract"]), _dec_int(r["clip_c"]),
                             int(r["n"]), int(r["trial"]), r["error"]) for r in csv.DictReader(f)]


def summary_row(s: SummaryRow):
    return [s.estimator, _enc_k(s.num_abstract), _enc_c(s.estimator, s.clip_c), s.n, s.trials,
            fmt(s.mse), fmt(s.bias), fmt(s.variance), fmt(s.stderr)]


def write_summary(path, rows) -> None:
    _write(path, SUMMARY_COLUMNS, [summary_row(s) for s in rows])


def read_summary(path) -> list[SummaryRow]:
    with open(path, newline="") as f:
        return [SummaryRow(r["estimator"], _dec_int(r["num_abstract"]), _dec_int(r["clip_c"]), int(r["n"]),
                           int(r["trials"]), float(r["mse"]), float(r["bias"]), float(r["variance"]),
                           float(r["stderr"])) for r in csv.DictReader(f)]


# -- statistics -------------------------------------------------------------

def summarize_group(results) -> SummaryRow:
    """MSE with its bias-variance split; exact rational arithmetic so that
    mse == bias**2 + variance up to the final float rounding."""
    results = list(results)
    k = len(results)
    if k < 2:
        raise ValueError("need at least 2 trials per group to summarize")
    keys = {r.key for r in results}
    if len(keys) != 1:
        raise ValueError("results from different groups")
    truths = {r.truth for r in results}
    if len(truths) != 1:
        raise ValueError("trials in one group disagree on the truth")
    truth = Fraction(truths.pop())
    est = [Fraction(r.estimate) for r in results]
    sq = [(e - truth) ** 2 for e in est]
    mse = sum(sq) / k
    mean = sum(est) / k
    bias = mean - truth
    var = sum((e - mean) ** 2 for e in est) / k
    sq_f = [float(v) for v in sq]
    mse_f = float(mse)
    sd = math.sqrt(math.fsum((v - mse_f) ** 2 for v in sq_f) / (k - 1))
    r0 = results[0]
    return SummaryRow(r0.estimator, r0.num_abstract, r0.clip_c, r0.n, k,
                      mse_f, float(bias), float(var), sd / math.sqrt(k))


def summarize(results) -> list[SummaryRow]:
    groups = defaultdict(list)
    for r in results:
        groups[r.key].append(r)
    return [summarize_group(groups[key]) for key in sorted(groups, key=sort_key)]


def heatmap_table(rows, n: int):
    """``(num_abstract list, clip list, {(k, c): log10 mse})`` for STAR rows at size ``n``."""
    cells = {(s.num_abstract, s.clip_c): s.mse for s in rows if s.estimator == "star" and s.n == n}
    ks = sorted({k for k, _ in cells})
    cs = sorted({c for _, c in cells}, key=lambda c: math.inf if c is None else c)
    vals = {key: (math.log10(m) if m > 0 else -math.inf) for key, m in cells.items()}
    return ks, cs, vals


def write_heatmap(path, rows, n: int) -> None:
    ks, cs, vals = heatmap_table(rows, n)
    header = ["num_abstract"] + ["c=" + _enc_c("star", c) for c in cs]
    body = [[k] + [fmt(vals[(k, c)]) if (k, c) in vals else "" for c in cs] for k in ks]
    _write(path, header, body)


def select(rows, n: int) -> dict:
    """Best (argmin MSE) and median (lower middle) STAR cells at size ``n``."""
    star = sorted((s for s in rows if s.estimator == "star" and s.n == n),
                  key=lambda s: (s.mse, s.num_abstract, math.inf if s.clip_c is None else s.clip_c))
    if not star:
        return {}
    return {"best": star[0], "median": star[(len(star) - 1) // 2]}


def write_selection(path, rows) -> None:
    body = []
    for n in sorted({s.n for s in rows}):
        for label, s in select(rows, n).items():
            body.append([n, label] + summary_row(s))
    _write(path, SELECTION_COLUMNS, body)
