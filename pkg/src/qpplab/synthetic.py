"""Deterministic generators for desk-scale experiments.

Two kinds of data: multivariate-normal samples with planted outlier rows
(for detector calibration and recovery tests), and full synthetic scenarios
where predictors carry a linear signal about effectiveness except for a
contaminated fraction of queries whose predictors are replaced by wide,
signal-free draws. Every output is a pure function of the parameters and a
64-bit seed (see prng for the fixed generator algorithm).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effectiveness import EffectivenessVector
from .matrix import QueryFeatureMatrix
from .prng import Xoshiro256PP
from . import robust_stats as rs


@dataclass
class SynthScenario:
    seed: int
    n: int
    m: int
    contamination: float
    shift: float  # corruption magnitude, in the generator's coordinate-scale units
    matrix: QueryFeatureMatrix
    effectiveness: EffectivenessVector
    truth_flags: list[bool]


def mvn_sample(mean, cov, n: int, seed: int) -> np.ndarray:
    """n draws from N(mean, cov) as rows.

    Normal deviates are consumed row-major from the seeded generator and
    correlated through the Cholesky factor of cov, so a fixed seed gives a
    bit-identical matrix on every platform.
    """
    mean_arr = np.asarray(mean, dtype=float)
    if mean_arr.ndim != 1:
        raise ValueError("mean must be a vector")
    lower = rs.cholesky(cov)
    if lower.shape[0] != mean_arr.size:
        raise ValueError("mean and covariance dimensions differ")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n!r}")
    rng = Xoshiro256PP(seed)
    z = rng.normals(n * mean_arr.size).reshape(n, mean_arr.size)
    return mean_arr + z @ lower.T


def plant_outliers(
    data: np.ndarray, count: int, shift: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Translate `count` rows by shift coordinate-scales in a random direction.

    The displacement of a chosen row is shift * sigma_j * u_j per column,
    where sigma is the per-column sample standard deviation of the input and
    u a seeded random unit vector (drawn before the row choice). Returns the
    modified copy and the truth flags.
    """
    arr = np.array(data, dtype=float, copy=True)
    if arr.ndim != 2:
        raise ValueError("plant_outliers expects a 2-D matrix")
    n, p = arr.shape
    if count < 0 or count >= n / 2:
        raise ValueError(f"count must satisfy 0 <= count < n/2, got count={count}, n={n}")
    if shift < 0:
        raise ValueError(f"shift must be non-negative, got {shift!r}")
    flags = np.zeros(n, dtype=bool)
    if count == 0:
        return arr, flags
    rng = Xoshiro256PP(seed)
    direction = rng.normals(p)
    norm = float(np.sqrt(direction @ direction))
    while norm == 0.0:
        direction = rng.normals(p)
        norm = float(np.sqrt(direction @ direction))
    direction /= norm
    sigma = arr.std(axis=0, ddof=1)
    rows = rng.sample_indices(count, n)
    displacement = shift * sigma * direction
    for i in rows:
        arr[i] += displacement
        flags[i] = True
    return arr, flags


def synth_qpp_scenario(
    n: int,
    m: int,
    noise: float,
    contamination: float,
    corrupt_noise: float,
    seed: int,
) -> SynthScenario:
    """Synthetic queries whose predictors track effectiveness, except a
    contaminated fraction with signal-free predictions.

    Effectiveness y_i is Uniform(0,1). Clean predictors follow
    a_j * y_i + b_j plus N(0, noise^2), with per-column slopes a_j drawn
    uniform in [0.5, 2] and intercepts b_j in [-1, 1]. Contaminated rows
    replace every predictor with a_j * 0.5 + b_j + N(0, corrupt_noise^2):
    values unrelated to the row's actual effectiveness. Draw order is
    slopes, intercepts, y, the clean noise (row-major), the contaminated
    row choice, then the replacement draws (row-major).
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if not 0.0 <= contamination < 0.5:
        raise ValueError(f"contamination must lie in [0, 0.5), got {contamination!r}")
    if noise <= 0.0 or corrupt_noise <= 0.0:
        raise ValueError("noise and corrupt_noise must be positive")
    if corrupt_noise <= noise:
        raise ValueError(
            f"corrupt_noise ({corrupt_noise!r}) must exceed noise ({noise!r}) "
            "for the contamination to be meaningful"
        )
    rng = Xoshiro256PP(seed)
    slopes = 0.5 + 1.5 * rng.uniforms(m)
    intercepts = -1.0 + 2.0 * rng.uniforms(m)
    y = rng.uniforms(n)
    eps = rng.normals(n * m).reshape(n, m)
    values = slopes * y[:, None] + intercepts + noise * eps

    count = int(round(contamination * n))
    flags = np.zeros(n, dtype=bool)
    if count:
        chosen = rng.sample_indices(count, n)
        replacements = rng.normals(count * m).reshape(count, m)
        for row_pos, i in enumerate(chosen):
            values[i] = slopes * 0.5 + intercepts + corrupt_noise * replacements[row_pos]
            flags[i] = True

    width = max(3, len(str(n)))
    query_ids = [f"q{i + 1:0{width}d}" for i in range(n)]
    matrix = QueryFeatureMatrix(
        query_ids=query_ids,
        predictor_names=[f"p{j + 1}" for j in range(m)],
        values=values,
        missing_mask=np.zeros((n, m), dtype=bool),
    )
    scores = {qid: float(v) for qid, v in zip(query_ids, y)}
    effectiveness = EffectivenessVector(
        metric_name="AP",
        cutoff=1000,
        scores=scores,
        mean=float(y.mean()),
    )
    return SynthScenario(
        seed=seed,
        n=n,
        m=m,
        contamination=contamination,
        shift=corrupt_noise,
        matrix=matrix,
        effectiveness=effectiveness,
        truth_flags=[bool(f) for f in flags],
    )


def truth_to_csv(scenario: SynthScenario) -> str:
    """The truth.csv companion file: which rows were contaminated."""
    header = (
        f"# seed={scenario.seed} n={scenario.n} m={scenario.m} "
        f"contamination={format(scenario.contamination, '.17g')} "
        f"shift={format(scenario.shift, '.17g')}"
    )
    lines = [header, "query_id,is_outlier"]
    for qid, flag in zip(scenario.matrix.query_ids, scenario.truth_flags):
        lines.append(f"{qid},{'true' if flag else 'false'}")
    return "\n".join(lines) + "\n"
