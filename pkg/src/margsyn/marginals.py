"""Marginal queries and marginal count vectors.

A marginal query is a subset of attribute indices (0-based, label at index m)
of size at most d.  Its marginal is the vector of occurrence counts over all
value combinations of those attributes, stored in row-major order with the
last attribute in the query varying fastest.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .dataset import Dataset, Schema


class QueryError(ValueError):
    """Invalid marginal query or mismatched query pair."""


@dataclass(frozen=True, order=True)
class MarginalQuery:
    """Strictly increasing, non-empty tuple of attribute indices."""

    attrs: tuple[int, ...]

    def __post_init__(self):
        attrs = tuple(int(a) for a in self.attrs)
        if not attrs:
            raise QueryError("empty query carries no information; size-0 marginals are excluded")
        if any(b <= a for a, b in zip(attrs, attrs[1:])):
            raise QueryError(f"attribute indices must be strictly increasing, got {attrs}")
        if attrs[0] < 0:
            raise QueryError(f"negative attribute index in {attrs}")
        object.__setattr__(self, "attrs", attrs)

    @property
    def order(self) -> int:
        return len(self.attrs)

    def validate(self, schema: Schema) -> None:
        if self.attrs[-1] >= schema.num_attributes:
            raise QueryError(f"attribute index {self.attrs[-1]} invalid for schema with "
                             f"{schema.num_attributes} attributes")


@dataclass(frozen=True)
class Marginal:
    """Count vector over the query's domain; noisy marginals may hold negative reals."""

    query: MarginalQuery
    counts: np.ndarray
    exact: bool

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64).copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def shape(self, schema: Schema) -> tuple[int, ...]:
        return schema.shape(self.query.attrs)


def enumerate_queries(m: int, d: int) -> list[MarginalQuery]:
    """All attribute subsets of size 1..d over the m features plus label.

    Deterministic (size, lexicographic) order; the count is
    sum_{k=1}^{d} C(m+1, k).
    """
    if d < 1 or d > m + 1:
        raise QueryError(f"marginal order d={d} out of range [1, {m + 1}]")
    out: list[MarginalQuery] = []
    for k in range(1, d + 1):
        for attrs in combinations(range(m + 1), k):
            out.append(MarginalQuery(attrs))
    return out


def query_count(m: int, d: int) -> int:
    return sum(math.comb(m + 1, k) for k in range(1, d + 1))


def compute_marginal(ds: Dataset, q: MarginalQuery) -> Marginal:
    """Exact occurrence counts of every value combination of q's attributes."""
    q.validate(ds.schema)
    shape = ds.schema.shape(q.attrs)
    ncells = int(np.prod(shape))
    if ds.n == 0:
        return Marginal(q, np.zeros(ncells), exact=True)
    sub = ds.codes[:, list(q.attrs)]
    flat = np.ravel_multi_index(tuple(sub.T), shape)
    counts = np.bincount(flat, minlength=ncells).astype(np.float64)
    return Marginal(q, counts, exact=True)


def l1_distance(a: Marginal, b: Marginal) -> float:
    if a.query != b.query:
        raise QueryError(f"query mismatch: {a.query.attrs} vs {b.query.attrs}")
    return float(np.abs(a.counts - b.counts).sum())


def normalized_l1(a: Marginal, b: Marginal, n: int) -> float:
    """l1 distance divided by the dataset size."""
    if n <= 0:
        raise ValueError("normalization requires n > 0")
    return l1_distance(a, b) / n


def project_marginal(h: Marginal, q_sub: MarginalQuery, schema: Schema) -> Marginal:
    """Sum the marginal over the attributes not in q_sub (q_sub must be a subset)."""
    if not set(q_sub.attrs) <= set(h.query.attrs):
        raise QueryError(f"{q_sub.attrs} is not a subset of {h.query.attrs}")
    shape = schema.shape(h.query.attrs)
    keep = [i for i, a in enumerate(h.query.attrs) if a in set(q_sub.attrs)]
    drop = tuple(i for i in range(len(h.query.attrs)) if i not in keep)
    counts = h.counts.reshape(shape)
    if drop:
        counts = counts.sum(axis=drop)
    return Marginal(q_sub, counts.ravel(), exact=h.exact)


# ---------------------------------------------------------------------------
# Serialization: one CSV of (query id, flattened index, count) plus a manifest
# describing each query's attribute set and domain shape.


def save_marginals(marginals: list[Marginal], schema: Schema,
                   csv_path: str | Path, manifest_path: str | Path) -> None:
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "flat_index", "count"])
        for qid, marg in enumerate(marginals):
            for idx, c in enumerate(marg.counts):
                writer.writerow([qid, idx, repr(float(c))])
    manifest = {
        "queries": [
            {
                "id": qid,
                "attrs": list(marg.query.attrs),
                "shape": list(marg.shape(schema)),
                "exact": marg.exact,
            }
            for qid, marg in enumerate(marginals)
        ]
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_marginals(csv_path: str | Path, manifest_path: str | Path) -> list[Marginal]:
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    entries = {e["id"]: e for e in manifest["queries"]}
    values: dict[int, dict[int, float]] = {qid: {} for qid in entries}
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            values[int(row["query_id"])][int(row["flat_index"])] = float(row["count"])
    out = []
    for qid in sorted(entries):
        entry = entries[qid]
        ncells = int(np.prod(entry["shape"]))
        counts = np.zeros(ncells)
        for idx, c in values[qid].items():
            counts[idx] = c
        out.append(Marginal(MarginalQuery(tuple(entry["attrs"])), counts, exact=bool(entry["exact"])))
    return out
