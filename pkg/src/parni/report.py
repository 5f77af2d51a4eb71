"""Aggregation of chain outputs into plot-ready CSV reports.

Writes, per run directory:

* ``pip.csv``     per-covariate inclusion probabilities, one column per chain
                  plus their mean.
* ``trace.csv``   thinned (chain, iteration, log_posterior, accepted) rows;
                  deterministic given (config, seed).
* ``timing.csv``  cumulative wall-clock seconds per recorded iteration (kept
                  separate from trace.csv so the trace is bit-reproducible).
* ``summary.csv`` per-chain and per-label acceptance rate, speed, average
                  MSE against a gold PIP vector, and relative efficiency
                  against a named baseline label.
* ``run.txt``     flat key=value metadata echo.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import fmt, write_csv
from .sampler import ChainOutput


def average_mse(pip: np.ndarray, gold: np.ndarray) -> float:
    """Mean over covariates of the squared PIP deviation from gold."""
    pip = np.asarray(pip, dtype=float)
    gold = np.asarray(gold, dtype=float)
    if pip.shape != gold.shape:
        raise ValueError("PIP vectors must share length")
    return float(np.mean((pip - gold) ** 2))


def thin_to_count(output: ChainOutput, count: int) -> ChainOutput:
    """Evenly subsample the recorded trace down to at most ``count`` rows."""
    kept = output.iterations.size
    if kept <= count:
        return output
    idx = np.unique(np.linspace(0, kept - 1, count).round().astype(int))
    return ChainOutput(
        models=output.models[idx],
        iterations=output.iterations[idx],
        log_post=output.log_post[idx],
        accepted=output.accepted[idx],
        cum_seconds=output.cum_seconds[idx],
        pip=output.pip,
        n_iter=output.n_iter,
        burn_in=output.burn_in,
        thin=output.thin,
        acceptance_rate=output.acceptance_rate,
        estimator_failures=output.estimator_failures,
        total_seconds=output.total_seconds,
        total_cpu_seconds=output.total_cpu_seconds,
        meta=dict(output.meta),
    )


def write_report(
    outdir,
    outputs: list[ChainOutput],
    labels: list[str] | None = None,
    gold: np.ndarray | None = None,
    baseline: str | None = None,
    names: tuple[str, ...] | None = None,
    metadata: dict | None = None,
) -> None:
    if not outputs:
        raise ValueError("no chain outputs to report")
    p = outputs[0].pip.size
    if any(o.pip.size != p for o in outputs):
        raise ValueError("chain outputs disagree on the number of covariates")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    labels = labels or [o.meta.get("sampler", "chain") + "-" + o.meta.get("acceptance", "") for o in outputs]
    names = names or tuple(f"x{j}" for j in range(p))

    header = ["covariate"] + [f"chain_{i + 1}" for i in range(len(outputs))] + ["mean"]
    mean_pip = np.mean([o.pip for o in outputs], axis=0)
    rows = [
        [names[j]] + [fmt(o.pip[j]) for o in outputs] + [fmt(mean_pip[j])]
        for j in range(p)
    ]
    write_csv(outdir / "pip.csv", header, rows)

    trace_rows = []
    timing_rows = []
    for i, o in enumerate(outputs, start=1):
        for r in range(o.iterations.size):
            trace_rows.append([i, int(o.iterations[r]), fmt(o.log_post[r]), int(o.accepted[r])])
            timing_rows.append([i, int(o.iterations[r]), fmt(o.cum_seconds[r])])
    write_csv(outdir / "trace.csv", ["chain", "iteration", "log_posterior", "accepted"], trace_rows)
    write_csv(outdir / "timing.csv", ["chain", "iteration", "cum_seconds"], timing_rows)

    mses = [average_mse(o.pip, gold) if gold is not None else None for o in outputs]
    by_label: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    label_mse = {
        lab: (float(np.mean([mses[i] for i in idx])) if gold is not None else None)
        for lab, idx in by_label.items()
    }
    base_mse = label_mse.get(baseline) if baseline is not None else None

    srows = []
    for i, o in enumerate(outputs):
        srows.append([
            labels[i],
            i + 1,
            fmt(o.acceptance_rate),
            o.n_iter,
            fmt(o.total_seconds),
            fmt(o.n_iter / o.total_seconds) if o.total_seconds > 0 else "",
            fmt(mses[i]) if mses[i] is not None else "",
            "",
        ])
    for lab, idx in by_label.items():
        rel = ""
        if base_mse is not None and label_mse[lab] not in (None, 0.0):
            rel = fmt(base_mse / label_mse[lab])
        srows.append([
            lab,
            "all",
            fmt(np.mean([outputs[i].acceptance_rate for i in idx])),
            sum(outputs[i].n_iter for i in idx),
            fmt(sum(outputs[i].total_seconds for i in idx)),
            "",
            fmt(label_mse[lab]) if label_mse[lab] is not None else "",
            rel,
        ])
    write_csv(
        outdir / "summary.csv",
        ["label", "chain", "acceptance_rate", "iterations", "seconds", "iters_per_second", "avg_mse", "rel_efficiency"],
        srows,
    )

    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"{key}={value}")
    for i, o in enumerate(outputs, start=1):
        for key, value in o.meta.items():
            lines.append(f"chain_{i}.{key}={value}")
        lines.append(f"chain_{i}.estimator_failures={o.estimator_failures}")
    (outdir / "run.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


__all__ = ["average_mse", "thin_to_count", "write_report"]
