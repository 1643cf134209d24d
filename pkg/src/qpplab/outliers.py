"""Hard-to-predict query identification via multivariate outlier detection.

Three detectors over the query-by-predictor matrix, all thresholding squared
Mahalanobis-type distances:

  classical    sample mean and sample covariance
  trc          rank-based robust estimate: coordinatewise medians, MAD
               scales, and Spearman correlations mapped through
               2*sin(pi*rho/6), followed by a PSD repair
  univariate   the single-column specialization (median/MAD z-scores)

The default cutoff on squared distances is m(n-1)/(n-m) times the F(m, n-m)
quantile at the requested level, the exact F-law scaling for distances with
estimated parameters; a plain chi-square(m) quantile is available as an
alternative cutoff family. One detection per matrix produces one flag set
shared by every predictor downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matrix import QueryFeatureMatrix
from . import robust_stats as rs

METHODS = ("classical", "trc", "univariate")
CUTOFF_FAMILIES = ("f", "chisq")


class DetectionError(ValueError):
    """Base class for failures that make detection impossible on the data."""


class DetectionInfeasibleError(DetectionError):
    """Too few complete rows relative to the number of predictors."""


class SingularCovarianceError(DetectionError):
    """Sample covariance is singular (or numerically so)."""


class DegenerateColumnError(DetectionError):
    """A predictor column has zero robust scale (constant or near-constant)."""


@dataclass
class OutlierReport:
    method: str
    query_ids: list[str]
    squared_distances: np.ndarray
    cutoff: float
    alpha: float
    flags: np.ndarray
    center: np.ndarray
    covariance: np.ndarray
    dropped_query_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.squared_distances = np.asarray(self.squared_distances, dtype=float)
        self.flags = np.asarray(self.flags, dtype=bool)
        if not (
            len(self.query_ids) == self.squared_distances.size == self.flags.size
        ):
            raise ValueError("report fields have mismatched lengths")

    @property
    def n_flagged(self) -> int:
        return int(self.flags.sum())

    def flagged_query_ids(self) -> list[str]:
        return [qid for qid, f in zip(self.query_ids, self.flags) if f]

    def to_csv(self) -> str:
        header = (
            f"# method={self.method} alpha={format(self.alpha, '.17g')} "
            f"cutoff={format(self.cutoff, '.17g')} flagged={self.n_flagged} "
            f"dropped={len(self.dropped_query_ids)}"
        )
        lines = [header, "query_id,distance_sq,flag"]
        for qid, d2, flag in zip(self.query_ids, self.squared_distances, self.flags):
            lines.append(f"{qid},{format(d2, '.17g')},{'true' if flag else 'false'}")
        return "\n".join(lines) + "\n"


def mahalanobis_sq(x, center, cov) -> float:
    """Squared Mahalanobis distance (x - center)^T cov^-1 (x - center)."""
    xa = np.asarray(x, dtype=float)
    ca = np.asarray(center, dtype=float)
    if xa.shape != ca.shape:
        raise ValueError("point and center dimensions differ")
    diff = xa - ca
    try:
        solved = rs.solve_spd(cov, diff)
    except rs.NotPositiveDefiniteError as exc:
        raise SingularCovarianceError(str(exc)) from exc
    return float(diff @ solved)


def _mahalanobis_sq_rows(rows: np.ndarray, center: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Squared distances of every row, sharing one Cholesky factorization."""
    try:
        lower = rs.cholesky(cov)
    except rs.NotPositiveDefiniteError as exc:
        raise SingularCovarianceError(str(exc)) from exc
    diff = rows - center
    # solve L z = diff^T for all rows at once; d^2 = ||z||^2 columnwise
    z = rs.forward_substitution(lower, diff.T)
    return np.einsum("ij,ij->j", z, z)


def distance_cutoff(m: int, n: int, alpha: float, cutoff_family: str = "f") -> float:
    """Cutoff for squared distances at level alpha.

    The F family scales the F(m, n-m) quantile by m(n-1)/(n-m); the chisq
    family uses the chi-square(m) quantile directly.
    """
    if cutoff_family not in CUTOFF_FAMILIES:
        raise ValueError(f"unknown cutoff family {cutoff_family!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if cutoff_family == "chisq":
        return rs.chi_square_quantile(m, alpha)
    if n <= m:
        raise DetectionInfeasibleError(f"F cutoff needs n > m, got n={n}, m={m}")
    return m * (n - 1) / (n - m) * rs.f_quantile(m, n - m, alpha)


def _prepare(matrix: QueryFeatureMatrix) -> tuple[QueryFeatureMatrix, list[str]]:
    reduced, dropped = matrix.drop_missing_rows()
    n, m = reduced.n_queries, reduced.n_predictors
    if m < 1:
        raise DetectionInfeasibleError("matrix has no predictor columns")
    if n <= m + 1:
        raise DetectionInfeasibleError(
            f"need more queries than predictors (n > m + 1), got n={n}, m={m}"
        )
    return reduced, dropped


def classical_detect(
    matrix: QueryFeatureMatrix, alpha: float = 0.95, cutoff_family: str = "f"
) -> OutlierReport:
    """Mahalanobis detection with the sample mean and covariance."""
    reduced, dropped = _prepare(matrix)
    data = reduced.values
    n, m = data.shape
    center = data.mean(axis=0)
    cov = np.cov(data, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    try:
        d2 = _mahalanobis_sq_rows(data, center, cov)
    except SingularCovarianceError as exc:
        raise SingularCovarianceError(
            "sample covariance is singular; drop collinear predictor columns "
            "or use the trc method"
        ) from exc
    cutoff = distance_cutoff(m, n, alpha, cutoff_family)
    return OutlierReport(
        method="classical",
        query_ids=list(reduced.query_ids),
        squared_distances=d2,
        cutoff=cutoff,
        alpha=alpha,
        flags=d2 > cutoff,
        center=center,
        covariance=cov,
        dropped_query_ids=dropped,
    )


def trc_covariance(matrix: QueryFeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Robust center and covariance from transformed rank correlations.

    Center is the coordinatewise median. The correlation matrix has entries
    2*sin(pi * spearman_rho / 6), the classical transformation that makes
    rank correlations consistent for the linear correlation under
    normality; scales are normal-consistent MADs. The assembled matrix is
    PSD-repaired before use.
    """
    reduced, _ = matrix.drop_missing_rows()
    data = reduced.values
    m = data.shape[1]
    center = np.median(data, axis=0)
    scales = np.empty(m)
    for j in range(m):
        scales[j] = rs.mad(data[:, j])
        if scales[j] == 0.0:
            raise DegenerateColumnError(
                f"predictor {reduced.predictor_names[j]!r} has zero MAD "
                "(constant or majority-tied column)"
            )
    corr = np.eye(m)
    for j in range(m):
        for k in range(j + 1, m):
            try:
                rho = rs.spearman_rho(data[:, j], data[:, k])
            except rs.DegenerateDataError as exc:
                raise DegenerateColumnError(str(exc)) from exc
            corr[j, k] = corr[k, j] = 2.0 * math.sin(math.pi * rho / 6.0)
    cov = corr * np.outer(scales, scales)
    return center, psd_repair(cov)


def psd_repair(cov) -> np.ndarray:
    """Clip small or negative eigenvalues so the matrix factors cleanly.

    Eigenvalues below eps = 1e-8 * max(eigenvalue) are raised to eps and the
    matrix reassembled; an already-SPD input comes back essentially
    unchanged.
    """
    a = 0.5 * (np.asarray(cov, dtype=float) + np.asarray(cov, dtype=float).T)
    eigvals, eigvecs = np.linalg.eigh(a)
    lam_max = float(eigvals.max())
    if lam_max <= 0.0:
        raise ValueError("cannot repair a matrix with no positive eigenvalue")
    eps = 1e-8 * lam_max
    clipped = np.maximum(eigvals, eps)
    repaired = (eigvecs * clipped) @ eigvecs.T
    return 0.5 * (repaired + repaired.T)


def trc_detect(
    matrix: QueryFeatureMatrix, alpha: float = 0.95, cutoff_family: str = "f"
) -> OutlierReport:
    """Robust detection: TRC center/covariance, F-law cutoff, one flag set.

    The single flag set is shared by all predictors downstream; per-predictor
    flagging exists only as the univariate baseline.
    """
    reduced, dropped = _prepare(matrix)
    center, cov = trc_covariance(reduced)
    data = reduced.values
    n, m = data.shape
    d2 = _mahalanobis_sq_rows(data, center, cov)
    cutoff = distance_cutoff(m, n, alpha, cutoff_family)
    return OutlierReport(
        method="trc",
        query_ids=list(reduced.query_ids),
        squared_distances=d2,
        cutoff=cutoff,
        alpha=alpha,
        flags=d2 > cutoff,
        center=center,
        covariance=cov,
        dropped_query_ids=dropped,
    )


def univariate_detect(
    values,
    alpha: float = 0.95,
    cutoff_family: str = "f",
    query_ids: list[str] | None = None,
) -> OutlierReport:
    """Median/MAD outlier detection for a single predictor column.

    This is the m = 1 specialization of the robust detector: squared
    standardized distances ((x - median) / mad)^2 against the F(1, n-1)
    quantile (the m(n-1)/(n-m) factor is 1 at m = 1).
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("univariate_detect expects a 1-D column")
    keep = np.isfinite(arr)
    ids = query_ids if query_ids is not None else [str(i) for i in range(arr.size)]
    if len(ids) != arr.size:
        raise ValueError("query_ids length does not match the column")
    dropped = [qid for qid, k in zip(ids, keep) if not k]
    ids = [qid for qid, k in zip(ids, keep) if k]
    arr = arr[keep]
    n = arr.size
    if n <= 2:
        raise DetectionInfeasibleError(f"need at least 3 values, got {n}")
    scale = rs.mad(arr)
    if scale == 0.0:
        raise DegenerateColumnError("zero MAD: column is constant or majority-tied")
    med = rs.median(arr)
    d2 = ((arr - med) / scale) ** 2
    cutoff = distance_cutoff(1, n, alpha, cutoff_family)
    return OutlierReport(
        method="univariate",
        query_ids=ids,
        squared_distances=d2,
        cutoff=cutoff,
        alpha=alpha,
        flags=d2 > cutoff,
        center=np.array([med]),
        covariance=np.array([[scale**2]]),
        dropped_query_ids=dropped,
    )


def univariate_reports(
    matrix: QueryFeatureMatrix, alpha: float = 0.95, cutoff_family: str = "f"
) -> dict[str, OutlierReport | None]:
    """Per-predictor univariate reports over the same complete-row sample.

    Rows with any missing cell are dropped first so every report aligns with
    the multivariate detection. Columns whose detection fails (zero MAD)
    map to None.
    """
    reduced, dropped = matrix.drop_missing_rows()
    out: dict[str, OutlierReport | None] = {}
    for j, name in enumerate(reduced.predictor_names):
        try:
            report = univariate_detect(
                reduced.values[:, j],
                alpha=alpha,
                cutoff_family=cutoff_family,
                query_ids=list(reduced.query_ids),
            )
            report.dropped_query_ids = list(dropped)
            out[name] = report
        except DetectionError:
            out[name] = None
    return out
