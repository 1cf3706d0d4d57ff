"""Rendering of analysis results to CSV, markdown and JSON.

All three formats run every number through the same 6-significant-digit
formatter, so a value printed in one format matches the others exactly.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Optional

import numpy as np

from .errors import InputError
from .nhst import FriedmanResult, PairwiseMatrix
from .threshold import ThresholdReport

FORMATS = ("csv", "markdown", "json")


def fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.6g}"


def _check_format(format: str):
    if format not in FORMATS:
        raise InputError(f"unknown format {format!r}, want one of {FORMATS}")


def _csv_table(header, rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def _markdown_table(header, rows) -> str:
    lines = ["| " + " | ".join(str(h) for h in header) + " |"]
    lines.append("|" + "|".join([" --- "] * len(header)) + "|")
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(lines) + "\n"


def render_rank_summary(summary, format: str = "csv") -> str:
    """Table of (algorithm, mean rank, times ranked first)."""
    _check_format(format)
    if format == "json":
        return (
            json.dumps(
                [
                    {"algorithm": a, "mean_rank": fmt(m), "top_count": c}
                    for a, m, c in summary
                ],
                indent=2,
            )
            + "\n"
        )
    rows = [(a, fmt(m), c) for a, m, c in summary]
    header = ["algorithm", "mean_rank", "top_count"]
    if format == "csv":
        return _csv_table(header, rows)
    return _markdown_table(header, rows)


def render_friedman(result: FriedmanResult, format: str = "csv") -> str:
    _check_format(format)
    if format == "json":
        return (
            json.dumps(
                {
                    "statistic": fmt(result.statistic),
                    "dof": result.dof,
                    "p_value": fmt(result.p_value),
                    "n_subjects": result.n_subjects,
                    "k_treatments": result.k_treatments,
                },
                indent=2,
            )
            + "\n"
        )
    header = ["statistic", "dof", "p_value", "n_subjects", "k_treatments"]
    rows = [
        (
            fmt(result.statistic),
            result.dof,
            fmt(result.p_value),
            result.n_subjects,
            result.k_treatments,
        )
    ]
    if format == "csv":
        return _csv_table(header, rows)
    return _markdown_table(header, rows)


def render_pairwise(
    m: PairwiseMatrix, format: str = "csv", alpha: Optional[float] = None
) -> str:
    """Pairwise matrix; p-values below ``alpha`` carry a significance marker.

    CSV and JSON are long-form (one row per unordered pair, with a
    ``significant`` column when ``alpha`` is given); markdown is the
    triangular matrix with significant entries in bold.
    """
    _check_format(format)
    flag = alpha is not None and m.kind == "nemenyi_p"
    if format == "markdown":
        names = m.algorithms
        header = [""] + list(names[:-1])
        rows = []
        for i in range(1, len(names)):
            row = [names[i]]
            for j in range(len(names) - 1):
                if j >= i:
                    row.append("")
                    continue
                text = fmt(m.values[i, j])
                if flag and m.values[i, j] < alpha:
                    text = f"**{text}**"
                row.append(text)
            rows.append(row)
        return _markdown_table(header, rows)

    pairs = []
    for i in range(len(m.algorithms)):
        for j in range(i + 1, len(m.algorithms)):
            entry = {
                "algorithm_a": m.algorithms[i],
                "algorithm_b": m.algorithms[j],
                "value": fmt(m.values[i, j]),
            }
            if flag:
                entry["significant"] = bool(m.values[i, j] < alpha)
            pairs.append(entry)
    if format == "json":
        return json.dumps({"kind": m.kind, "pairs": pairs}, indent=2) + "\n"
    header = ["algorithm_a", "algorithm_b", "value"] + (["significant"] if flag else [])
    rows = [[e[h] for h in header] for e in pairs]
    return _csv_table(header, rows)


def render_threshold(report: ThresholdReport, format: str = "csv") -> str:
    _check_format(format)
    if format == "json":
        return (
            json.dumps(
                {
                    "median_delta_resample": fmt(report.median_delta_resample),
                    "median_delta_cv": fmt(report.median_delta_cv),
                    "threshold": fmt(report.threshold),
                    "n_pairs_used": report.n_pairs_used,
                    "n_cv_values": report.n_cv_values,
                },
                indent=2,
            )
            + "\n"
        )
    header = [
        "median_delta_resample",
        "median_delta_cv",
        "threshold",
        "n_pairs_used",
        "n_cv_values",
    ]
    rows = [
        (
            fmt(report.median_delta_resample),
            fmt(report.median_delta_cv),
            fmt(report.threshold),
            report.n_pairs_used,
            report.n_cv_values,
        )
    ]
    if format == "csv":
        return _csv_table(header, rows)
    return _markdown_table(header, rows)


def render_diagnostics(rows, format: str = "csv") -> str:
    """Per-parameter convergence table; a footer notes the omitted
    multivariate PSRF."""
    _check_format(format)
    footer = "multivariate PSRF not computed (single-parameter diagnostics only)"
    if format == "json":
        return (
            json.dumps(
                {
                    "parameters": [
                        {
                            "parameter": r.parameter,
                            "r_hat": fmt(r.r_hat) if r.r_hat is not None else None,
                            "ess": fmt(r.ess) if r.ess is not None else None,
                        }
                        for r in rows
                    ],
                    "note": footer,
                },
                indent=2,
            )
            + "\n"
        )
    header = ["parameter", "r_hat", "ess"]
    body = [
        (
            r.parameter,
            fmt(r.r_hat) if r.r_hat is not None else "undefined",
            fmt(r.ess) if r.ess is not None else "undefined",
        )
        for r in rows
    ]
    if format == "csv":
        return _csv_table(header, body) + f"# {footer}\n"
    return _markdown_table(header, body) + f"\n{footer}\n"


def ppc_scatter_csv(pairs) -> str:
    """``t_real,t_rep`` rows for external scatter plotting."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t_real", "t_rep"])
    for t_real, t_rep in pairs:
        writer.writerow([fmt(t_real), fmt(t_rep)])
    return out.getvalue()
