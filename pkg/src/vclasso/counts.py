"""Read-count matrices and CSV ingestion.

A count table has one row per sample and one column per taxon (or gene,
word, ...). Cells are nonnegative integers; the per-row total is the
sequencing depth of that sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .validation import freeze_array

# Header labels that mark the first CSV column as sample identifiers
# rather than counts.
_ID_HEADER_NAMES = {"", "sample", "sample_id", "sampleid", "id"}


@dataclass(frozen=True)
class CountMatrix:
    """Immutable n x p table of nonnegative integer read counts."""

    counts: np.ndarray
    row_totals: np.ndarray
    sample_ids: tuple[str, ...] = field(default=())
    taxon_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValueError(f"counts must be 2-dimensional, got shape {counts.shape}")
        n, p = counts.shape
        if n < 1 or p < 2:
            raise ValueError(f"need at least 1 sample and 2 taxa, got shape {counts.shape}")
        if not np.issubdtype(counts.dtype, np.integer):
            as_int = np.asarray(counts, dtype=np.int64)
            if not np.array_equal(as_int, counts):
                bad = np.argwhere(as_int != counts)[0]
                raise ValueError(f"counts must be integers; non-integer value at row {bad[0]}, column {bad[1]}")
            counts = as_int
        else:
            counts = counts.astype(np.int64, copy=True)
        if np.any(counts < 0):
            bad = np.argwhere(counts < 0)[0]
            raise ValueError(f"counts must be nonnegative; negative value at row {bad[0]}, column {bad[1]}")
        totals = np.asarray(self.row_totals, dtype=np.int64)
        if totals.shape != (n,):
            raise ValueError(f"row_totals must have shape ({n},), got {totals.shape}")
        sums = counts.sum(axis=1)
        if not np.array_equal(totals, sums):
            bad = int(np.argwhere(totals != sums)[0][0])
            raise ValueError(
                f"row_totals[{bad}] = {totals[bad]} does not match the row sum {sums[bad]}"
            )
        sample_ids = tuple(self.sample_ids) or tuple(f"S{i + 1}" for i in range(n))
        taxon_ids = tuple(self.taxon_ids) or tuple(f"T{j + 1}" for j in range(p))
        if len(sample_ids) != n:
            raise ValueError(f"expected {n} sample ids, got {len(sample_ids)}")
        if len(taxon_ids) != p:
            raise ValueError(f"expected {p} taxon ids, got {len(taxon_ids)}")
        object.__setattr__(self, "counts", freeze_array(counts))
        object.__setattr__(self, "row_totals", freeze_array(sums))
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "taxon_ids", taxon_ids)

    @classmethod
    def from_array(
        cls,
        counts,
        sample_ids: Sequence[str] = (),
        taxon_ids: Sequence[str] = (),
    ) -> "CountMatrix":
        counts = np.asarray(counts)
        return cls(
            counts=counts,
            row_totals=np.asarray(counts, dtype=np.int64).sum(axis=1),
            sample_ids=tuple(sample_ids),
            taxon_ids=tuple(taxon_ids),
        )

    @property
    def n_samples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_taxa(self) -> int:
        return self.counts.shape[1]


def _parse_count_cell(text: str, row: int, col: int, sample: str, taxon: str) -> int:
    stripped = text.strip()
    try:
        value = int(stripped)
    except ValueError:
        raise ValueError(
            f"invalid count {stripped!r} at data row {row}, column {col} "
            f"(sample {sample!r}, taxon {taxon!r}): not an integer"
        ) from None
    if value < 0:
        raise ValueError(
            f"invalid count {stripped!r} at data row {row}, column {col} "
            f"(sample {sample!r}, taxon {taxon!r}): negative"
        )
    return value


def load_counts(path) -> CountMatrix:
    """Load a count table from CSV.

    The first row names the taxa. If the first header cell is empty or a
    sample-id label (``sample``, ``sample_id``, ``id``), the first column
    holds sample identifiers; otherwise every column is a count column and
    sample ids are generated.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header = [cell.strip() for cell in rows[0]]
    has_id_column = header[0].lower() in _ID_HEADER_NAMES
    taxa = tuple(header[1:] if has_id_column else header)
    if len(taxa) < 2:
        raise ValueError(f"{path}: need at least 2 taxon columns, got {len(taxa)}")

    samples: list[str] = []
    data: list[list[int]] = []
    for i, row in enumerate(rows[1:], start=1):
        expected = len(taxa) + (1 if has_id_column else 0)
        if len(row) != expected:
            raise ValueError(
                f"{path}: data row {i} has {len(row)} cells, expected {expected}"
            )
        if has_id_column:
            sample, cells = row[0].strip(), row[1:]
        else:
            sample, cells = f"S{i}", row
        samples.append(sample)
        data.append(
            [
                _parse_count_cell(cell, i, j + 1, sample, taxa[j])
                for j, cell in enumerate(cells)
            ]
        )
    return CountMatrix.from_array(np.asarray(data, dtype=np.int64), samples, taxa)
