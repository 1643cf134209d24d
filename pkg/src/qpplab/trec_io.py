"""Parsers and writers for the standard evaluation file formats.

Formats handled:
  - TREC run files, 6 whitespace-separated columns: qid Q0 docid rank score tag
  - TREC qrels, 4 columns: qid 0 docid grade
  - flat topic files: qid<TAB>query text (or qid:query text)
  - Letor feature files: label qid:Q 1:v1 2:v2 ... # docid
  - query-by-predictor matrices as CSV with a header row, missing token "NA"

All parsers are pure functions over text and either return a value or raise
ParseError with the offending line number. Runs are re-sorted by score
(tie-break doc id ascending) and ranks rewritten contiguously from 1; the
rank column of the input is only compared against the normalized ranks for
diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Union

import numpy as np

from .matrix import QueryFeatureMatrix

TextSource = Union[str, IO[str], Iterable[str]]

MISSING_TOKEN = "NA"


class ParseError(ValueError):
    """Malformed input; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    doc_id: str
    rank: int
    score: float
    run_tag: str


@dataclass
class RunSet:
    """Ordered map query_id -> ranked entries, sorted by score descending."""

    entries: dict[str, list[RunEntry]] = field(default_factory=dict)
    rank_mismatches: int = 0  # input lines whose stated rank differed after re-sorting

    def query_ids(self) -> list[str]:
        return list(self.entries.keys())

    def ranking(self, query_id: str, depth: int | None = None) -> list[str]:
        """Doc ids of one query in rank order, optionally truncated."""
        docs = [e.doc_id for e in self.entries.get(query_id, [])]
        return docs if depth is None else docs[:depth]

    def scores(self, query_id: str) -> list[float]:
        return [e.score for e in self.entries.get(query_id, [])]


@dataclass
class QrelsSet:
    """Map query_id -> doc_id -> relevance grade (non-negative)."""

    grades: dict[str, dict[str, int]] = field(default_factory=dict)
    clamped_negative: int = 0  # negative input grades clamped to 0

    def query_ids(self) -> list[str]:
        return list(self.grades.keys())


@dataclass(frozen=True)
class Topic:
    query_id: str
    text: str
    term_count: int


@dataclass
class FeatureTable:
    """Per-(query, document) feature vectors with a fixed feature-name order."""

    feature_names: list[str]
    vectors: dict[tuple[str, str], list[float]] = field(default_factory=dict)

    def value(self, query_id: str, doc_id: str, feature_name: str) -> float:
        idx = self.feature_names.index(feature_name)
        return self.vectors[(query_id, doc_id)][idx]


def iter_lines(source: TextSource) -> Iterator[tuple[int, str]]:
    if isinstance(source, str):
        lines: Iterable[str] = source.splitlines()
    else:
        lines = source
    for lineno, raw in enumerate(lines, start=1):
        yield lineno, raw.rstrip("\n").rstrip("\r")


def parse_run(source: TextSource) -> RunSet:
    """Parse a TREC run file into a normalized RunSet.

    Lines must have 6 whitespace-separated fields. The second field (the
    conventional "Q0") is not validated. Scores must be finite numbers;
    duplicate (query, doc) pairs are rejected.
    """
    per_query: dict[str, list[tuple[str, int, float, str]]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, line in iter_lines(source):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(lineno, f"expected 6 fields, got {len(fields)}")
        qid, _q0, docid, rank_str, score_str, tag = fields
        try:
            input_rank = int(rank_str)
        except ValueError:
            raise ParseError(lineno, f"non-numeric rank {rank_str!r}") from None
        try:
            score = float(score_str)
        except ValueError:
            raise ParseError(lineno, f"non-numeric score {score_str!r}") from None
        if not math.isfinite(score):
            raise ParseError(lineno, f"non-finite score {score_str!r}")
        if (qid, docid) in seen:
            raise ParseError(lineno, f"duplicate document {docid!r} for query {qid!r}")
        seen.add((qid, docid))
        per_query.setdefault(qid, []).append((docid, input_rank, score, tag))

    run = RunSet()
    for qid, rows in per_query.items():
        rows.sort(key=lambda r: (-r[2], r[0]))
        normalized = []
        for rank, (docid, input_rank, score, tag) in enumerate(rows, start=1):
            if input_rank != rank:
                run.rank_mismatches += 1
            normalized.append(RunEntry(qid, docid, rank, score, tag))
        run.entries[qid] = normalized
    return run


def parse_qrels(source: TextSource) -> QrelsSet:
    """Parse TREC qrels. Negative grades are clamped to 0 and counted."""
    qrels = QrelsSet()
    for lineno, line in iter_lines(source):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(lineno, f"expected 4 fields, got {len(fields)}")
        qid, _iteration, docid, grade_str = fields
        try:
            grade = int(grade_str)
        except ValueError:
            raise ParseError(lineno, f"non-numeric grade {grade_str!r}") from None
        by_doc = qrels.grades.setdefault(qid, {})
        if docid in by_doc:
            raise ParseError(lineno, f"duplicate judgment for ({qid!r}, {docid!r})")
        if grade < 0:
            grade = 0
            qrels.clamped_negative += 1
        by_doc[docid] = grade
    return qrels


def parse_topics(source: TextSource, separator: str = "tab") -> list[Topic]:
    """Parse flat qid-to-text topic lines.

    separator selects the variant: "tab" for qid<TAB>text, "colon" for
    qid:text. Term counts come from whitespace-splitting the lowercased
    text; empty query text is an error.
    """
    if separator not in ("tab", "colon"):
        raise ValueError(f"unknown topics separator {separator!r}")
    sep = "\t" if separator == "tab" else ":"
    topics = []
    seen: set[str] = set()
    for lineno, line in iter_lines(source):
        if not line.strip():
            continue
        if sep not in line:
            raise ParseError(lineno, f"missing {separator} separator")
        qid, _, text = line.partition(sep)
        qid = qid.strip()
        text = text.strip()
        if not qid:
            raise ParseError(lineno, "empty query id")
        if not text:
            raise ParseError(lineno, f"empty query text for query {qid!r}")
        if qid in seen:
            raise ParseError(lineno, f"duplicate topic {qid!r}")
        seen.add(qid)
        topics.append(Topic(qid, text, term_count=len(text.lower().split())))
    return topics


def parse_feature_file(source: TextSource) -> FeatureTable:
    """Parse a Letor-style feature file keyed by (query, document).

    Each line is "label qid:Q i:v ... # docid" with feature indices dense
    from 1. The label field is ignored. All lines must agree on the number
    of features.
    """
    table = FeatureTable(feature_names=[])
    n_features: int | None = None
    for lineno, line in iter_lines(source):
        if not line.strip():
            continue
        body, hash_sign, comment = line.partition("#")
        if not hash_sign:
            raise ParseError(lineno, "missing '# docid' comment")
        docid = comment.strip().split()[0] if comment.strip() else ""
        if not docid:
            raise ParseError(lineno, "empty docid after '#'")
        fields = body.split()
        if len(fields) < 2:
            raise ParseError(lineno, "expected at least a label and qid field")
        qid_field = fields[1]
        if not qid_field.startswith("qid:") or len(qid_field) <= 4:
            raise ParseError(lineno, f"second field must be 'qid:<id>', got {qid_field!r}")
        qid = qid_field[4:]
        values: dict[int, float] = {}
        for token in fields[2:]:
            idx_str, colon, value_str = token.partition(":")
            if not colon:
                raise ParseError(lineno, f"expected 'index:value' pair, got {token!r}")
            try:
                idx = int(idx_str)
                value = float(value_str)
            except ValueError:
                raise ParseError(lineno, f"malformed feature pair {token!r}") from None
            if idx in values:
                raise ParseError(lineno, f"repeated feature index {idx}")
            values[idx] = value
        if not values:
            raise ParseError(lineno, "no feature pairs on line")
        m = len(values)
        if sorted(values) != list(range(1, m + 1)):
            raise ParseError(lineno, f"feature indices not dense 1..{m}")
        if n_features is None:
            n_features = m
            table.feature_names = [f"f{i}" for i in range(1, m + 1)]
        elif m != n_features:
            raise ParseError(lineno, f"expected {n_features} features, got {m}")
        key = (qid, docid)
        if key in table.vectors:
            raise ParseError(lineno, f"duplicate feature vector for ({qid!r}, {docid!r})")
        table.vectors[key] = [values[i] for i in range(1, m + 1)]
    return table


def read_corpus_scores(source: TextSource) -> dict[str, float]:
    """Parse the optional per-query corpus-score CSV ("query_id,score")."""
    scores: dict[str, float] = {}
    for lineno, line in iter_lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        if lineno == 1 and line.strip().lower() == "query_id,score":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 'query_id,score', got {line!r}")
        qid = parts[0].strip()
        try:
            score = float(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-numeric score {parts[1]!r}") from None
        if qid in scores:
            raise ParseError(lineno, f"duplicate corpus score for query {qid!r}")
        scores[qid] = score
    return scores


def _format_value(x: float) -> str:
    # 17 significant digits guarantee exact float round-trips
    return format(x, ".17g")


def write_matrix(matrix: QueryFeatureMatrix) -> str:
    """Serialize a QueryFeatureMatrix as CSV (header row, "NA" for missing)."""
    for name in matrix.predictor_names:
        if "," in name:
            raise ValueError(f"predictor name {name!r} contains a comma")
    for qid in matrix.query_ids:
        if "," in qid:
            raise ValueError(f"query id {qid!r} contains a comma")
    lines = ["query_id," + ",".join(matrix.predictor_names)]
    for i, qid in enumerate(matrix.query_ids):
        cells = []
        for j in range(matrix.n_predictors):
            if matrix.missing_mask[i, j]:
                cells.append(MISSING_TOKEN)
            else:
                cells.append(_format_value(matrix.values[i, j]))
        lines.append(qid + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def read_matrix(source: TextSource) -> QueryFeatureMatrix:
    """Parse a matrix CSV written by write_matrix."""
    header: list[str] | None = None
    query_ids: list[str] = []
    rows: list[list[float]] = []
    mask_rows: list[list[bool]] = []
    for lineno, line in iter_lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split(",")
        if header is None:
            if parts[0] != "query_id" or len(parts) < 2:
                raise ParseError(lineno, "expected header 'query_id,<name1>,...'")
            header = parts[1:]
            if len(set(header)) != len(header):
                raise ParseError(lineno, "duplicate predictor names in header")
            continue
        if len(parts) != len(header) + 1:
            raise ParseError(
                lineno, f"expected {len(header) + 1} cells, got {len(parts)}"
            )
        qid = parts[0]
        if qid in query_ids:
            raise ParseError(lineno, f"duplicate query id {qid!r}")
        values = []
        mask = []
        for cell in parts[1:]:
            if cell == MISSING_TOKEN:
                values.append(float("nan"))
                mask.append(True)
            else:
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(lineno, f"non-numeric cell {cell!r}") from None
                mask.append(False)
        query_ids.append(qid)
        rows.append(values)
        mask_rows.append(mask)
    if header is None:
        raise ParseError(1, "empty matrix file (missing header)")
    values_arr = (
        np.array(rows, dtype=float)
        if rows
        else np.empty((0, len(header)), dtype=float)
    )
    mask_arr = (
        np.array(mask_rows, dtype=bool)
        if mask_rows
        else np.empty((0, len(header)), dtype=bool)
    )
    return QueryFeatureMatrix(
        query_ids=query_ids,
        predictor_names=list(header),
        values=values_arr,
        missing_mask=mask_arr,
    )
