"""Correlation tables, correlation-difference significance, regressions,
error metrics, and scatter reports.

The correlation table mirrors the evaluation layout: for every predictor it
reports Pearson r over all queries, over the non-flagged queries, over the
flagged queries only, and over the queries kept by that predictor's own
univariate detection. Each non-All row carries a one-sided Fisher z test of
"this subset correlates better than All"; rows whose correlation is
undefined are kept with a reason code so the table shape stays stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .effectiveness import EffectivenessVector
from .matrix import QueryFeatureMatrix
from .outliers import OutlierReport
from . import robust_stats as rs

SUBSETS = ("All", "NoOutliers", "OutliersOnly", "Univariate")

P_SIGNIFICANT = 0.05


@dataclass
class CorrelationRow:
    predictor: str
    subset: str
    n: int
    r: float | None
    p_vs_all: float | None
    significant: bool
    reason: str | None = None


@dataclass(frozen=True)
class RegressionLine:
    slope: float
    intercept: float
    n: int


@dataclass
class ScatterPoint:
    query_id: str
    x: float
    y: float
    flagged: bool


@dataclass
class ScatterData:
    predictor: str
    points: list[ScatterPoint]
    line_all: RegressionLine | None
    line_clean: RegressionLine | None
    line_all_reason: str | None = None
    line_clean_reason: str | None = None


def fisher_z_test(r1: float, n1: int, r2: float, n2: int, direction: str = "greater") -> float:
    """Independent-groups Fisher z test for the difference of correlations.

    Z = (atanh(r1) - atanh(r2)) / sqrt(1/(n1-3) + 1/(n2-3)). For
    direction="greater" the p-value is the upper tail (is r1 larger than
    r2); "two_sided" doubles the smaller tail. The result is clamped into
    the open interval (0, 1).
    """
    if direction not in ("greater", "two_sided"):
        raise ValueError(f"unknown direction {direction!r}")
    for label, n in (("n1", n1), ("n2", n2)):
        if n < 4:
            raise ValueError(f"fisher_z_test: {label} must be >= 4, got {n}")
    for label, r in (("r1", r1), ("r2", r2)):
        if abs(r) >= 1.0:
            raise ValueError(f"fisher_z_test: |{label}| must be < 1, got {r}")
    z1 = math.atanh(r1)
    z2 = math.atanh(r2)
    se = math.sqrt(1.0 / (n1 - 3) + 1.0 / (n2 - 3))
    z = (z1 - z2) / se
    if direction == "greater":
        p = 1.0 - rs.normal_cdf(z)
    else:
        p = 2.0 * (1.0 - rs.normal_cdf(abs(z)))
    return min(max(p, 1e-300), 1.0 - 1e-16)


def ols_regression(x, y) -> RegressionLine:
    """Least-squares line through (x, y); x must not be constant."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("ols_regression expects two 1-D vectors of equal length")
    n = xa.size
    if n < 2:
        raise rs.DegenerateDataError(f"ols_regression: need at least 2 points, got {n}")
    dx = xa - xa.mean()
    ssx = float(dx @ dx)
    if ssx == 0.0:
        raise rs.DegenerateDataError("ols_regression: x is constant")
    slope = float(dx @ (ya - ya.mean())) / ssx
    intercept = float(ya.mean() - slope * xa.mean())
    return RegressionLine(slope=slope, intercept=intercept, n=n)


def error_metrics(pred, actual) -> tuple[float, float]:
    """Mean squared error and mean absolute error of aligned vectors."""
    pa = np.asarray(pred, dtype=float)
    aa = np.asarray(actual, dtype=float)
    if pa.shape != aa.shape or pa.ndim != 1 or pa.size == 0:
        raise ValueError("error_metrics expects two non-empty 1-D vectors of equal length")
    diff = pa - aa
    return float(np.mean(diff**2)), float(np.mean(np.abs(diff)))


def _aligned(
    matrix: QueryFeatureMatrix,
    eff: EffectivenessVector,
    report: OutlierReport,
) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Queries present in the report and in the effectiveness vector.

    Order follows the report. Returns (ids, flags, effectiveness values).
    """
    ids = []
    flags = []
    y = []
    for qid, flag in zip(report.query_ids, report.flags):
        if qid in eff.scores:
            ids.append(qid)
            flags.append(bool(flag))
            y.append(eff.scores[qid])
    return ids, np.asarray(flags, dtype=bool), np.asarray(y, dtype=float)


def _correlation_or_reason(x: np.ndarray, y: np.ndarray) -> tuple[float | None, str | None]:
    if x.size < 3:
        return None, "subset_too_small"
    try:
        return rs.pearson_r(x, y), None
    except rs.DegenerateDataError:
        return None, "constant_input"


def correlation_table(
    matrix: QueryFeatureMatrix,
    eff: EffectivenessVector,
    report: OutlierReport,
    uni_reports: Mapping[str, OutlierReport | None] | None = None,
) -> list[CorrelationRow]:
    """Per-predictor correlation rows over the evaluation subsets.

    The NoOutliers/OutliersOnly split uses the shared multivariate report;
    the Univariate row keeps the queries not flagged by that predictor's own
    single-column detection. Every non-All row carries the one-sided test
    against the All correlation when both are defined.
    """
    ids, flags, y = _aligned(matrix, eff, report)
    id_pos = {qid: i for i, qid in enumerate(matrix.query_ids)}
    rows: list[CorrelationRow] = []
    for j, name in enumerate(matrix.predictor_names):
        x = np.array([matrix.values[id_pos[qid], j] for qid in ids])
        subsets: dict[str, np.ndarray] = {
            "All": np.ones(len(ids), dtype=bool),
            "NoOutliers": ~flags,
            "OutliersOnly": flags,
        }
        uni_missing_reason = None
        if uni_reports is None:
            uni_missing_reason = "univariate_report_missing"
        else:
            uni = uni_reports.get(name)
            if uni is None:
                uni_missing_reason = "univariate_detection_failed"
            else:
                uni_flagged = set(uni.flagged_query_ids())
                subsets["Univariate"] = np.array(
                    [qid not in uni_flagged for qid in ids], dtype=bool
                )

        r_all, all_reason = _correlation_or_reason(x, y)
        n_all = len(ids)
        rows.append(
            CorrelationRow(name, "All", n_all, r_all, None, False, all_reason)
        )
        for subset in SUBSETS[1:]:
            if subset == "Univariate" and uni_missing_reason is not None:
                rows.append(CorrelationRow(name, subset, 0, None, None, False, uni_missing_reason))
                continue
            sel = subsets[subset]
            n_sub = int(sel.sum())
            r_sub, reason = _correlation_or_reason(x[sel], y[sel])
            p = None
            significant = False
            if r_sub is not None and r_all is not None:
                try:
                    p = fisher_z_test(r_sub, n_sub, r_all, n_all, "greater")
                    significant = p < P_SIGNIFICANT
                except ValueError:
                    reason = "test_undefined"
            elif r_sub is not None and r_all is None:
                reason = "all_row_undefined"
            rows.append(CorrelationRow(name, subset, n_sub, r_sub, p, significant, reason))
    return rows


def table_to_csv(rows: list[CorrelationRow]) -> str:
    """CSV rendering: predictor,subset,n,r,p_vs_all,significant."""
    lines = ["predictor,subset,n,r,p_vs_all,significant"]
    for row in rows:
        r = format(row.r, ".17g") if row.r is not None else ""
        p = format(row.p_vs_all, ".17g") if row.p_vs_all is not None else ""
        sig = "true" if row.significant else "false"
        lines.append(f"{row.predictor},{row.subset},{row.n},{r},{p},{sig}")
    return "\n".join(lines) + "\n"


def table_to_text(rows: list[CorrelationRow]) -> str:
    """Aligned plain-text table; a star marks p < 0.05 one-sided."""
    header = ("predictor", "subset", "n", "r", "p_vs_all", "reason")
    cells = [header]
    for row in rows:
        r = f"{row.r:.3f}" + ("*" if row.significant else "") if row.r is not None else "-"
        p = f"{row.p_vs_all:.4f}" if row.p_vs_all is not None else "-"
        cells.append((row.predictor, row.subset, str(row.n), r, p, row.reason or ""))
    widths = [max(len(line[i]) for line in cells) for i in range(len(header))]
    out = []
    for line in cells:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(out) + "\n"


def scatter_report(
    matrix: QueryFeatureMatrix,
    predictor: str,
    eff: EffectivenessVector,
    report: OutlierReport,
) -> ScatterData:
    """Predictor-versus-effectiveness scatter with two regression lines.

    One line fits all aligned queries, the other the non-flagged subset;
    either is omitted with a reason code when its sample is degenerate.
    """
    ids, flags, y = _aligned(matrix, eff, report)
    col = matrix.column(predictor)
    id_pos = {qid: i for i, qid in enumerate(matrix.query_ids)}
    x = np.array([col[id_pos[qid]] for qid in ids])
    points = [
        ScatterPoint(qid, float(xv), float(yv), bool(fl))
        for qid, xv, yv, fl in zip(ids, x, y, flags)
    ]
    line_all = line_clean = None
    all_reason = clean_reason = None
    try:
        line_all = ols_regression(x, y)
    except rs.DegenerateDataError as exc:
        all_reason = f"all_line_undefined: {exc}"
    keep = ~flags
    try:
        line_clean = ols_regression(x[keep], y[keep])
    except rs.DegenerateDataError as exc:
        clean_reason = f"clean_line_undefined: {exc}"
    return ScatterData(predictor, points, line_all, line_clean, all_reason, clean_reason)


def scatter_to_csv(data: ScatterData) -> str:
    lines = []
    for label, line, reason in (
        ("line_all", data.line_all, data.line_all_reason),
        ("line_clean", data.line_clean, data.line_clean_reason),
    ):
        if line is not None:
            lines.append(
                f"# {label} slope={format(line.slope, '.17g')} "
                f"intercept={format(line.intercept, '.17g')} n={line.n}"
            )
        else:
            lines.append(f"# {label} omitted: {reason}")
    lines.append("query_id,predictor_value,effectiveness,flagged")
    for p in data.points:
        lines.append(
            f"{p.query_id},{format(p.x, '.17g')},{format(p.y, '.17g')},"
            f"{'true' if p.flagged else 'false'}"
        )
    return "\n".join(lines) + "\n"


# SVG rendering: fixed canvas, deterministic float formatting. Flagged
# points are red; the all-queries regression line is red and the
# no-outliers line is black.
_SVG_W, _SVG_H = 640, 480
_MARGIN = 50
_COLOR_FLAGGED = "#d62728"
_COLOR_INLIER = "#1f77b4"
_COLOR_LINE_ALL = "#d62728"
_COLOR_LINE_CLEAN = "#000000"


def _axis_range(values: np.ndarray) -> tuple[float, float]:
    lo = float(values.min()) if values.size else 0.0
    hi = float(values.max()) if values.size else 1.0
    if hi == lo:
        lo -= 0.5
        hi += 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def scatter_to_svg(data: ScatterData) -> str:
    """Standalone SVG 1.1 scatter plot, byte-deterministic for fixed input."""
    xs = np.array([p.x for p in data.points])
    ys = np.array([p.y for p in data.points])
    x0, x1 = _axis_range(xs)
    y0, y1 = _axis_range(ys)
    plot_w = _SVG_W - 2 * _MARGIN
    plot_h = _SVG_H - 2 * _MARGIN

    def to_px(xv: float, yv: float) -> tuple[float, float]:
        px = _MARGIN + (xv - x0) / (x1 - x0) * plot_w
        py = _SVG_H - _MARGIN - (yv - y0) / (y1 - y0) * plot_h
        return px, py

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_SVG_W}" height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" fill="#ffffff"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#999999" stroke-width="1"/>',
        f'<text x="{_SVG_W // 2}" y="{_SVG_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_escape(data.predictor)}</text>',
        f'<text x="14" y="{_SVG_H // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 14 {_SVG_H // 2})">effectiveness</text>',
    ]
    for label, value, anchor_x, anchor_y in (
        (_fmt(x0), x0, None, None),
        (_fmt(x1), x1, None, None),
    ):
        px, _ = to_px(value, y0)
        parts.append(
            f'<text x="{_fmt(px)}" y="{_SVG_H - _MARGIN + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
    for value in (y0, y1):
        _, py = to_px(x0, value)
        parts.append(
            f'<text x="{_MARGIN - 6}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(value)}</text>'
        )
    for label, line, color in (
        ("all", data.line_all, _COLOR_LINE_ALL),
        ("clean", data.line_clean, _COLOR_LINE_CLEAN),
    ):
        if line is None:
            continue
        xa, xb = x0, x1
        ya = line.intercept + line.slope * xa
        yb = line.intercept + line.slope * xb
        pxa, pya = to_px(xa, ya)
        pxb, pyb = to_px(xb, yb)
        parts.append(
            f'<line x1="{_fmt(pxa)}" y1="{_fmt(pya)}" x2="{_fmt(pxb)}" y2="{_fmt(pyb)}" '
            f'stroke="{color}" stroke-width="1.5" clip-path="url(#plot)"/>'
        )
    parts.insert(
        2,
        f'<defs><clipPath id="plot"><rect x="{_MARGIN}" y="{_MARGIN}" '
        f'width="{plot_w}" height="{plot_h}"/></clipPath></defs>',
    )
    for p in data.points:
        px, py = to_px(p.x, p.y)
        color = _COLOR_FLAGGED if p.flagged else _COLOR_INLIER
        parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
