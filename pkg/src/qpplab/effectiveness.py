"""Per-query retrieval effectiveness: average precision and nDCG at a cutoff.

AP binarizes at grade >= 1 and divides by the total number of relevant
documents in the qrels (not capped at the cutoff, matching trec_eval).
nDCG uses linear gain and a log2(rank + 1) discount by default; exponential
gain (2^grade - 1) is available behind a switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .trec_io import ParseError, QrelsSet, RunSet, TextSource, iter_lines

METRICS = ("AP", "NDCG")


@dataclass
class EffectivenessVector:
    metric_name: str
    cutoff: int
    scores: dict[str, float]
    mean: float
    run_only_queries: int = 0  # queries in the run but absent from the qrels

    def to_csv(self) -> str:
        header = (
            f"# metric={self.metric_name} cutoff={self.cutoff} "
            f"mean={format(self.mean, '.17g')} run_only={self.run_only_queries}\n"
        )
        lines = [header + "query_id,score"]
        for qid, score in self.scores.items():
            lines.append(f"{qid},{format(score, '.17g')}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, source: TextSource) -> "EffectivenessVector":
        metric = "AP"
        cutoff = 0
        run_only = 0
        scores: dict[str, float] = {}
        saw_header = False
        for lineno, line in iter_lines(source):
            if not line.strip():
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "metric":
                        metric = value
                    elif key == "cutoff":
                        cutoff = int(value)
                    elif key == "run_only":
                        run_only = int(value)
                continue
            if line.strip() == "query_id,score":
                saw_header = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(lineno, f"expected 'query_id,score', got {line!r}")
            try:
                score = float(parts[1])
            except ValueError:
                raise ParseError(lineno, f"non-numeric score {parts[1]!r}") from None
            if parts[0] in scores:
                raise ParseError(lineno, f"duplicate query id {parts[0]!r}")
            scores[parts[0]] = score
        if not saw_header:
            raise ParseError(1, "missing 'query_id,score' header")
        mean = sum(scores.values()) / len(scores) if scores else 0.0
        return cls(metric, cutoff, scores, mean, run_only)


def average_precision(
    ranking: Sequence[str], rels: Mapping[str, int], cutoff: int
) -> float:
    """AP at a cutoff; relevant means grade >= 1.

    The denominator is the number of relevant documents in the judgments,
    regardless of the cutoff. Queries without relevant documents score 0.
    """
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff!r}")
    total_relevant = sum(1 for g in rels.values() if g >= 1)
    if total_relevant == 0:
        return 0.0
    hits = 0
    acc = 0.0
    for i, doc in enumerate(ranking[:cutoff], start=1):
        if rels.get(doc, 0) >= 1:
            hits += 1
            acc += hits / i
    return acc / total_relevant


def ndcg(
    ranking: Sequence[str],
    rels: Mapping[str, int],
    cutoff: int,
    exponential_gain: bool = False,
) -> float:
    """nDCG at a cutoff; returns 0 when the ideal DCG is 0."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff!r}")

    def gain(grade: int) -> float:
        return float(2**grade - 1) if exponential_gain else float(grade)

    dcg = 0.0
    for i, doc in enumerate(ranking[:cutoff], start=1):
        g = rels.get(doc, 0)
        if g > 0:
            dcg += gain(g) / math.log2(i + 1)
    ideal = sorted(rels.values(), reverse=True)[:cutoff]
    idcg = sum(gain(g) / math.log2(i + 1) for i, g in enumerate(ideal, start=1) if g > 0)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def evaluate_run(
    run: RunSet,
    qrels: QrelsSet,
    metric: str = "AP",
    cutoff: int = 1000,
    exponential_gain: bool = False,
) -> EffectivenessVector:
    """Score every judged query; queries absent from the run score 0.

    Queries retrieved but never judged are skipped and counted in
    run_only_queries.
    """
    name = metric.upper()
    if name not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    scores: dict[str, float] = {}
    for qid, rels in qrels.grades.items():
        ranking = run.ranking(qid)
        if name == "AP":
            scores[qid] = average_precision(ranking, rels, cutoff)
        else:
            scores[qid] = ndcg(ranking, rels, cutoff, exponential_gain)
    run_only = sum(1 for qid in run.entries if qid not in qrels.grades)
    mean = sum(scores.values()) / len(scores) if scores else 0.0
    return EffectivenessVector(name, cutoff, scores, mean, run_only)
