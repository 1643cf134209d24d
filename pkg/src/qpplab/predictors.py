"""Post-retrieval query performance predictors and matrix assembly.

Five predictor kinds are supported:
  nqc    population std of the top-k scores over |corpus score|
  uqc    population std of the top-k scores, unnormalized
  wig    mean excess of the top-k scores over the corpus score, / sqrt(|q|)
  qf     overlap between the primary and feedback top-k document sets
  letor  a per-document feature aggregated over the retrieved documents

The corpus score is either supplied externally per query or estimated as
the mean score of the query's full retrieved list; the latter needs no
index statistics. Standard deviations are population (divide by k), which
matches the common NQC implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .matrix import QueryFeatureMatrix
from .trec_io import FeatureTable, RunSet, Topic

AGGREGATIONS = ("max", "mean", "std", "sum", "min")
PREDICTOR_KINDS = ("nqc", "uqc", "wig", "qf", "letor")
CORPUS_SCORE_MODES = ("provided", "mean_of_full_list")


@dataclass
class PredictorConfig:
    k_nqc: int = 100
    k_wig: int = 5
    k_qf: int = 50
    corpus_score_mode: str = "mean_of_full_list"
    aggregation: str = "max"
    letor_depth: int = 1000

    def __post_init__(self):
        for label, k in (("k_nqc", self.k_nqc), ("k_wig", self.k_wig), ("k_qf", self.k_qf)):
            if k < 1:
                raise ValueError(f"{label} must be >= 1, got {k!r}")
        if self.corpus_score_mode not in CORPUS_SCORE_MODES:
            raise ValueError(f"unknown corpus_score_mode {self.corpus_score_mode!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.letor_depth < 1:
            raise ValueError(f"letor_depth must be >= 1, got {self.letor_depth!r}")


@dataclass
class PredictorSpec:
    """One matrix column: a predictor kind plus its parameters.

    k overrides the config default for nqc/uqc/wig/qf. Letor specs name the
    feature (and optionally the table when several files are loaded) and may
    override the aggregation and depth.
    """

    name: str
    kind: str
    k: int | None = None
    feature: str | None = None
    table: str | None = None
    aggregation: str | None = None
    depth: int | None = None

    def __post_init__(self):
        if self.kind not in PREDICTOR_KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "letor" and not self.feature:
            raise ValueError(f"letor spec {self.name!r} needs a feature name")
        if self.k is not None and self.k < 1:
            raise ValueError(f"spec {self.name!r}: k must be >= 1")
        if self.aggregation is not None and self.aggregation not in AGGREGATIONS:
            raise ValueError(f"spec {self.name!r}: unknown aggregation {self.aggregation!r}")


def _population_std(values: Sequence[float]) -> float:
    return float(np.std(np.asarray(values, dtype=float)))


def nqc(scores: Sequence[float], corpus_score: float, k: int) -> float:
    """Normalized query commitment: std of the top-k scores / |corpus score|."""
    if len(scores) == 0:
        raise ValueError("nqc: empty score list")
    if k < 1:
        raise ValueError(f"nqc: k must be >= 1, got {k!r}")
    if corpus_score == 0.0:
        raise ValueError("nqc: corpus score must be nonzero")
    return _population_std(scores[: min(k, len(scores))]) / abs(corpus_score)


def uqc(scores: Sequence[float], k: int) -> float:
    """Unnormalized query commitment: std of the top-k scores."""
    if len(scores) == 0:
        raise ValueError("uqc: empty score list")
    if k < 1:
        raise ValueError(f"uqc: k must be >= 1, got {k!r}")
    return _population_std(scores[: min(k, len(scores))])


def wig(scores: Sequence[float], corpus_score: float, term_count: int, k: int) -> float:
    """Weighted information gain over the top-k scores.

    Mean of (score - corpus_score) over the top min(k, L) documents, scaled
    by 1/sqrt(term_count).
    """
    if len(scores) == 0:
        raise ValueError("wig: empty score list")
    if term_count < 1:
        raise ValueError(f"wig: term_count must be >= 1, got {term_count!r}")
    if k < 1:
        raise ValueError(f"wig: k must be >= 1, got {k!r}")
    top = scores[: min(k, len(scores))]
    return sum(s - corpus_score for s in top) / (len(top) * math.sqrt(term_count))


def qf(primary_topk: Sequence[str], feedback_topk: Sequence[str], k: int) -> float:
    """Query feedback: |top-k(primary) intersect top-k(feedback)| / k.

    Both lists must be duplicate-free. The feedback list comes from an
    externally supplied second run; no retrieval happens here.
    """
    if k <= 0:
        raise ValueError(f"qf: k must be positive, got {k!r}")
    if len(primary_topk) == 0 or len(feedback_topk) == 0:
        raise ValueError("qf: document lists must be non-empty")
    primary = list(primary_topk[:k])
    feedback = list(feedback_topk[:k])
    if len(set(primary)) != len(primary) or len(set(feedback)) != len(feedback):
        raise ValueError("qf: document lists must not contain duplicates")
    return len(set(primary) & set(feedback)) / k


def aggregate_feature(
    table: FeatureTable,
    run: RunSet,
    query_id: str,
    feature_name: str,
    agg: str = "max",
    depth: int = 1000,
) -> float | None:
    """Aggregate one feature over a query's retrieved documents.

    Returns None (a missing cell) when none of the query's top-depth
    documents appear in the table.
    """
    if agg not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {agg!r}")
    if feature_name not in table.feature_names:
        raise KeyError(f"unknown feature {feature_name!r}")
    idx = table.feature_names.index(feature_name)
    covered = [
        table.vectors[(query_id, doc)][idx]
        for doc in run.ranking(query_id, depth)
        if (query_id, doc) in table.vectors
    ]
    if not covered:
        return None
    arr = np.asarray(covered, dtype=float)
    if agg == "max":
        return float(arr.max())
    if agg == "min":
        return float(arr.min())
    if agg == "mean":
        return float(arr.mean())
    if agg == "sum":
        return float(arr.sum())
    return float(arr.std())


def _corpus_score(
    config: PredictorConfig,
    query_id: str,
    scores: Sequence[float],
    corpus_scores: Mapping[str, float] | None,
) -> float | None:
    if config.corpus_score_mode == "provided":
        if corpus_scores is None:
            raise ValueError(
                "corpus_score_mode is 'provided' but no corpus-score table was given"
            )
        return corpus_scores.get(query_id)
    return float(np.mean(np.asarray(scores, dtype=float))) if scores else None


def build_feature_matrix(
    config: PredictorConfig,
    run: RunSet,
    specs: Sequence[PredictorSpec],
    *,
    feedback_run: RunSet | None = None,
    topics: Sequence[Topic] | None = None,
    tables: Mapping[str, FeatureTable] | None = None,
    corpus_scores: Mapping[str, float] | None = None,
) -> QueryFeatureMatrix:
    """Assemble the query-by-predictor matrix.

    Rows are all queries of the primary run in run order; columns follow the
    spec order. A cell that a predictor cannot produce for a query (zero
    corpus score, no topic, query absent from the feedback run, no feature
    coverage) is masked missing. Structural problems (unknown kinds or
    features, required inputs absent) raise immediately.
    """
    if not specs:
        raise ValueError("at least one predictor spec is required")
    query_ids = run.query_ids()
    if not query_ids:
        raise ValueError("the run contains no queries")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate predictor spec names")

    for spec in specs:
        if spec.kind == "qf" and feedback_run is None:
            raise ValueError(f"spec {spec.name!r} needs a feedback run")
        if spec.kind == "wig" and topics is None:
            raise ValueError(f"spec {spec.name!r} needs topics for the term counts")
        if spec.kind == "letor":
            if not tables:
                raise ValueError(f"spec {spec.name!r} needs a feature table")
            table_key = spec.table if spec.table is not None else next(iter(tables))
            if table_key not in tables:
                raise ValueError(f"spec {spec.name!r} references unknown table {table_key!r}")
            if spec.feature not in tables[table_key].feature_names:
                raise ValueError(
                    f"spec {spec.name!r} references unknown feature {spec.feature!r}"
                )

    term_counts = {t.query_id: t.term_count for t in topics} if topics else {}

    n, m = len(query_ids), len(specs)
    values = np.full((n, m), np.nan)
    mask = np.ones((n, m), dtype=bool)
    for i, qid in enumerate(query_ids):
        scores = run.scores(qid)
        for j, spec in enumerate(specs):
            cell = _compute_cell(
                config, spec, run, qid, scores,
                feedback_run=feedback_run,
                term_counts=term_counts,
                tables=tables,
                corpus_scores=corpus_scores,
            )
            if cell is not None:
                values[i, j] = cell
                mask[i, j] = False
    return QueryFeatureMatrix(query_ids, names, values, mask)


def _compute_cell(
    config: PredictorConfig,
    spec: PredictorSpec,
    run: RunSet,
    qid: str,
    scores: Sequence[float],
    *,
    feedback_run: RunSet | None,
    term_counts: Mapping[str, int],
    tables: Mapping[str, FeatureTable] | None,
    corpus_scores: Mapping[str, float] | None,
) -> float | None:
    if spec.kind == "letor":
        assert tables is not None
        table_key = spec.table if spec.table is not None else next(iter(tables))
        return aggregate_feature(
            tables[table_key],
            run,
            qid,
            spec.feature,  # type: ignore[arg-type]
            agg=spec.aggregation or config.aggregation,
            depth=spec.depth or config.letor_depth,
        )
    if not scores:
        return None
    if spec.kind == "uqc":
        return uqc(scores, spec.k or config.k_nqc)
    if spec.kind == "nqc":
        corpus = _corpus_score(config, qid, scores, corpus_scores)
        if corpus is None or corpus == 0.0:
            return None
        return nqc(scores, corpus, spec.k or config.k_nqc)
    if spec.kind == "wig":
        if qid not in term_counts:
            return None
        corpus = _corpus_score(config, qid, scores, corpus_scores)
        if corpus is None:
            return None
        return wig(scores, corpus, term_counts[qid], spec.k or config.k_wig)
    # qf
    assert feedback_run is not None
    k = spec.k or config.k_qf
    feedback_docs = feedback_run.ranking(qid, k)
    if not feedback_docs:
        return None
    return qf(run.ranking(qid, k), feedback_docs, k)
