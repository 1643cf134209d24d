"""Numerical foundations: ranks, correlations, robust scale, SPD linear
algebra, and the distribution special functions needed for outlier cutoffs.

Everything here is pure and deterministic. Matrices are plain numpy arrays;
symmetric inputs are validated and re-symmetrized internally rather than
wrapped in a dedicated matrix class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Normal-consistency factor for the MAD, fixed so robust and classical
# scales are comparable.
MAD_CONSISTENCY = 1.4826

_EPS = 3e-15
_FPMIN = 1e-300
_MAXIT = 20000


class DegenerateDataError(ValueError):
    """Raised when an input is too small or constant for the statistic."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky pivot is non-positive."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative special-function evaluation fails to settle."""


# ---------------------------------------------------------------------------
# ranks and correlations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankVector:
    """Values together with their midranks (ties get the average position)."""

    values: np.ndarray
    ranks: np.ndarray


def midranks(x) -> RankVector:
    """Rank data from smallest to largest, averaging positions over ties.

    Ranks run 1..n and sum to n(n+1)/2 regardless of ties.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError("midranks expects a 1-D input")
    n = arr.size
    if n == 0:
        raise DegenerateDataError("midranks: empty input")
    if not np.all(np.isfinite(arr)):
        raise ValueError("midranks: input must be finite")
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(n, dtype=float)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # positions i..j (0-based) share the average 1-based rank
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return RankVector(values=arr, ranks=ranks)


def pearson_r(x, y) -> float:
    """Product-moment correlation, clamped into [-1, 1].

    Constant inputs raise DegenerateDataError instead of returning NaN so
    that callers must handle degenerate subsets explicitly.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("pearson_r expects two 1-D vectors of equal length")
    n = xa.size
    if n < 3:
        raise DegenerateDataError(f"pearson_r: need at least 3 observations, got {n}")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    ssx = float(dx @ dx)
    ssy = float(dy @ dy)
    if ssx == 0.0 or ssy == 0.0:
        raise DegenerateDataError("pearson_r: correlation undefined for constant input")
    r = float(dx @ dy) / math.sqrt(ssx * ssy)
    return min(1.0, max(-1.0, r))


def spearman_rho(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of the midranks."""
    return pearson_r(midranks(x).ranks, midranks(y).ranks)


def median(x) -> float:
    """Median with the midpoint-of-two-middles convention for even length."""
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise DegenerateDataError("median: empty input")
    return float(np.median(arr))


def mad(x) -> float:
    """Normal-consistent median absolute deviation (factor 1.4826)."""
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise DegenerateDataError("mad: empty input")
    med = float(np.median(arr))
    return MAD_CONSISTENCY * float(np.median(np.abs(arr - med)))


# ---------------------------------------------------------------------------
# SPD linear algebra
# ---------------------------------------------------------------------------


def _as_symmetric(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = 1.0 + float(np.max(np.abs(a))) if a.size else 1.0
    if float(np.max(np.abs(a - a.T), initial=0.0)) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def cholesky(matrix) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the SPD input.

    Raises NotPositiveDefiniteError on a non-positive pivot, which callers
    use to trigger covariance repair.
    """
    a = _as_symmetric(matrix)
    n = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= 0.0 or not math.isfinite(pivot):
            raise NotPositiveDefiniteError(
                f"cholesky: non-positive pivot {pivot!r} at index {j}"
            )
        lower[j, j] = math.sqrt(pivot)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def forward_substitution(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L y = b for lower-triangular L. b may hold columns of rhs."""
    n = lower.shape[0]
    y = np.array(b, dtype=float, copy=True)
    for i in range(n):
        if i:
            y[i] -= lower[i, :i] @ y[:i]
        y[i] /= lower[i, i]
    return y


def back_substitution(lower: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve L.T x = y for lower-triangular L. y may hold columns of rhs."""
    n = lower.shape[0]
    x = np.array(y, dtype=float, copy=True)
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[i] -= lower[i + 1 :, i] @ x[i + 1 :]
        x[i] /= lower[i, i]
    return x


def solve_spd(matrix, b) -> np.ndarray:
    """Solve matrix @ x = b for SPD matrix via Cholesky factorization."""
    lower = cholesky(matrix)
    rhs = np.asarray(b, dtype=float)
    return back_substitution(lower, forward_substitution(lower, rhs))


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

# Lanczos approximation, g = 7, 9 coefficients. Relative accuracy is a few
# ulp over the range used here (arguments up to ~1e7 for the F cutoffs).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0 (Lanczos approximation)."""
    if not x > 0.0:
        raise ValueError(f"ln_gamma: argument must be positive, got {x!r}")
    if x < 0.5:
        # reflection keeps the series argument away from the poles
        return math.log(math.pi / math.sin(math.pi * x)) - ln_gamma(1.0 - x)
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i, coef in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += coef / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _LN_SQRT_2PI + (z + 0.5) * math.log(t) - t + math.log(acc)


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta, modified Lentz evaluation.
    # Convergence slows near x = (a+1)/(a+b+2); the iteration cap covers the
    # large-denominator-dof cases that arise from F cutoffs.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ConvergenceError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].

    Uses the continued fraction directly for x below the symmetry point
    (a+1)/(a+b+2) and the reflection I_x(a,b) = 1 - I_{1-x}(b,a) above it.
    """
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"regularized_incomplete_beta: a, b must be positive, got a={a!r}, b={b!r}")
    if x < 0.0 or x > 1.0:
        raise ValueError(f"regularized_incomplete_beta: x must lie in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        ln_gamma(a + b)
        - ln_gamma(a)
        - ln_gamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0."""
    if a <= 0.0:
        raise ValueError(f"regularized_gamma_p: a must be positive, got {a!r}")
    if x < 0.0:
        raise ValueError(f"regularized_gamma_p: x must be non-negative, got {x!r}")
    if x == 0.0:
        return 0.0
    ln_scale = -x + a * math.log(x) - ln_gamma(a)
    if x < a + 1.0:
        # series representation
        term = 1.0 / a
        total = term
        denom = a
        for _ in range(_MAXIT):
            denom += 1.0
            term *= x / denom
            total += term
            if abs(term) < abs(total) * _EPS:
                return total * math.exp(ln_scale)
        raise ConvergenceError(f"incomplete gamma series did not converge for a={a}, x={x}")
    # continued fraction for the upper tail Q(a, x), modified Lentz
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return 1.0 - math.exp(ln_scale) * h
    raise ConvergenceError(f"incomplete gamma fraction did not converge for a={a}, x={x}")


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def f_cdf(x: float, d1: int, d2: int) -> float:
    """CDF of the F distribution with (d1, d2) degrees of freedom."""
    _check_df(d1, d2)
    if x <= 0.0:
        return 0.0
    scaled = d1 * x
    return regularized_incomplete_beta(0.5 * d1, 0.5 * d2, scaled / (scaled + d2))


def _f_pdf(x: float, d1: int, d2: int) -> float:
    if x <= 0.0:
        return 0.0
    half1 = 0.5 * d1
    half2 = 0.5 * d2
    ln_pdf = (
        ln_gamma(half1 + half2)
        - ln_gamma(half1)
        - ln_gamma(half2)
        + half1 * math.log(d1 / d2)
        + (half1 - 1.0) * math.log(x)
        - (half1 + half2) * math.log1p(d1 * x / d2)
    )
    return math.exp(ln_pdf)


def chi_square_cdf(x: float, df: int) -> float:
    """CDF of the chi-square distribution with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"chi_square_cdf: df must be >= 1, got {df!r}")
    if x <= 0.0:
        return 0.0
    return regularized_gamma_p(0.5 * df, 0.5 * x)


def _chi_square_pdf(x: float, df: int) -> float:
    if x <= 0.0:
        return 0.0
    half = 0.5 * df
    return math.exp((half - 1.0) * math.log(x) - 0.5 * x - half * math.log(2.0) - ln_gamma(half))


def _check_df(d1: int, d2: int) -> None:
    if d1 < 1 or d2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got d1={d1!r}, d2={d2!r}")


def _check_prob(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly in (0, 1), got {p!r}")


def _invert_cdf(cdf, pdf, p: float, name: str) -> float:
    """Quantile by bracketed bisection followed by a Newton polish.

    Bisection narrows the bracket to roughly 1e-3 relative width, which
    Newton then drives to |CDF(x) - p| <= 1e-12 (error raised if the target
    of 1e-10 cannot be reached in the iteration budget).
    """
    lo = 0.0
    hi = 1.0
    doublings = 0
    while cdf(hi) < p:
        lo = hi
        hi *= 2.0
        doublings += 1
        if doublings > 2400:
            raise ConvergenceError(f"{name}: failed to bracket the quantile for p={p}")
    while hi - lo > 1e-3 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(100):
        err = cdf(x) - p
        if abs(err) <= 1e-12:
            return x
        if err > 0.0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        slope = pdf(x)
        nxt = x - err / slope if slope > 0.0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        x = nxt
    if abs(cdf(x) - p) <= 1e-10:
        return x
    raise ConvergenceError(f"{name}: quantile iteration did not converge for p={p}")


def f_quantile(d1: int, d2: int, p: float) -> float:
    """Quantile of the F distribution: x with CDF(x; d1, d2) = p."""
    _check_df(d1, d2)
    _check_prob(p)
    return _invert_cdf(
        lambda x: f_cdf(x, d1, d2),
        lambda x: _f_pdf(x, d1, d2),
        p,
        f"f_quantile(d1={d1}, d2={d2})",
    )


def chi_square_quantile(df: int, p: float) -> float:
    """Quantile of the chi-square distribution: x with CDF(x; df) = p."""
    if df < 1:
        raise ValueError(f"chi_square_quantile: df must be >= 1, got {df!r}")
    _check_prob(p)
    return _invert_cdf(
        lambda x: chi_square_cdf(x, df),
        lambda x: _chi_square_pdf(x, df),
        p,
        f"chi_square_quantile(df={df})",
    )
