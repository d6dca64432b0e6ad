"""Report rendering: delimited verdict tables plus summary figures."""

from __future__ import annotations

import csv
import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .datatypes import RepresentsReport
from .suite import SuiteReport

FIG_SIZE = (8.0, 4.5)


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_suite_report(report: SuiteReport, outdir: str) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, "suite_report.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", "expectation", "status", "actual"])
        for r in report.results:
            writer.writerow([r.case_id, r.expectation, "pass" if r.passed else "fail", r.actual])

    cases: dict[str, list[bool]] = {}
    for r in report.results:
        cases.setdefault(r.case_id, []).append(r.passed)
    labels = list(cases)
    passes = [sum(v) for v in cases.values()]
    fails = [len(v) - sum(v) for v in cases.values()]

    fig, ax = plt.subplots(figsize=(max(FIG_SIZE[0], 0.32 * len(labels)), FIG_SIZE[1]))
    xs = range(len(labels))
    ax.bar(xs, passes, color="#2a7a2a", label="pass")
    ax.bar(xs, fails, bottom=passes, color="#b03030", label="fail")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("expectations")
    ax.set_title("regression suite results")
    ax.legend(loc="upper right")
    png_path = os.path.join(outdir, "suite_report.png")
    _save(fig, png_path)
    return [csv_path, png_path]


def write_represents_report(report: RepresentsReport, outdir: str, name: str = "represents") -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, f"{name}_report.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["args", "expected", "outcome", "decoded", "steps"])
        for r in report.rows:
            writer.writerow([" ".join(map(str, r.args)), r.expected, r.outcome, r.decoded, r.steps])

    fig, ax = plt.subplots(figsize=FIG_SIZE)
    labels = [",".join(map(str, r.args)) for r in report.rows]
    steps = [r.steps or 0 for r in report.rows]
    colors = ["#2a7a2a" if r.outcome == "pass" else "#b03030" for r in report.rows]
    ax.bar(range(len(labels)), steps, color=colors)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=0, fontsize=8)
    ax.set_xlabel("arguments")
    ax.set_ylabel("reduction steps")
    ax.set_title("representation check: reduction work per row")
    png_path = os.path.join(outdir, f"{name}_steps.png")
    _save(fig, png_path)
    return [csv_path, png_path]
