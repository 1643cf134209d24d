"""Query-by-predictor matrix: the object outlier detection operates on.

Rows are queries, columns are predictors. Cells that a predictor could not
produce (no feature coverage, missing feedback run, ...) are masked missing
and carry NaN in the value array.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QueryFeatureMatrix:
    query_ids: list[str]
    predictor_names: list[str]
    values: np.ndarray
    missing_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n, m = len(self.query_ids), len(self.predictor_names)
        if self.values.shape != (n, m):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match "
                f"{n} queries x {m} predictors"
            )
        if self.missing_mask is None:
            self.missing_mask = ~np.isfinite(self.values)
        else:
            self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
            if self.missing_mask.shape != (n, m):
                raise ValueError("missing_mask shape does not match values")
        if len(set(self.query_ids)) != n:
            raise ValueError("duplicate query ids")
        if len(set(self.predictor_names)) != m:
            raise ValueError("duplicate predictor names")
        present = self.values[~self.missing_mask]
        if present.size and not np.all(np.isfinite(present)):
            raise ValueError("non-finite value in a cell not masked as missing")

    @property
    def n_queries(self) -> int:
        return len(self.query_ids)

    @property
    def n_predictors(self) -> int:
        return len(self.predictor_names)

    def column(self, name: str) -> np.ndarray:
        """Values of one predictor column (NaN where masked)."""
        return self.values[:, self._col_index(name)]

    def _col_index(self, name: str) -> int:
        try:
            return self.predictor_names.index(name)
        except ValueError:
            raise KeyError(f"unknown predictor {name!r}") from None

    def drop_missing_rows(self) -> tuple["QueryFeatureMatrix", list[str]]:
        """Remove queries with any missing cell.

        Returns the reduced matrix and the dropped query ids. Detection
        requires complete rows, so this is the documented missing-cell
        resolution step.
        """
        keep = ~self.missing_mask.any(axis=1)
        dropped = [qid for qid, k in zip(self.query_ids, keep) if not k]
        reduced = QueryFeatureMatrix(
            query_ids=[qid for qid, k in zip(self.query_ids, keep) if k],
            predictor_names=list(self.predictor_names),
            values=self.values[keep].copy(),
            missing_mask=self.missing_mask[keep].copy(),
        )
        return reduced, dropped

    def equals(self, other: "QueryFeatureMatrix") -> bool:
        """Exact equality: ids, names, masks, and bit-identical present values."""
        if self.query_ids != other.query_ids:
            return False
        if self.predictor_names != other.predictor_names:
            return False
        if not np.array_equal(self.missing_mask, other.missing_mask):
            return False
        mine = self.values[~self.missing_mask]
        theirs = other.values[~other.missing_mask]
        return np.array_equal(mine, theirs)
