"""Response-matrix ingestion and pairwise network encodings.

Binary person-by-item response data is the raw input; the unit of analysis
downstream is the family of pairwise networks built from it: one network per
item over person pairs and one network per person over item pairs.  Networks
are pure functions of the response matrix, so they are materialized only on
demand (tests, export); the likelihood machinery reads edges straight from
the responses.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, product
from pathlib import Path

import numpy as np

MISSING = -1  # internal code for an unobserved response

__all__ = [
    "MISSING",
    "Encoding",
    "NetworkAxis",
    "ResponseMatrix",
    "PairNetwork",
    "ResponseDataError",
    "ResponseParseError",
    "ResponseValidationError",
    "load_response_csv",
    "parse_response_csv",
    "save_response_csv",
    "encode_pair",
    "materialize_network",
    "pairwise_counts",
    "PairwiseCounts",
]


class ResponseDataError(ValueError):
    """Base class for response-data problems."""


class ResponseParseError(ResponseDataError):
    """A cell in the input file is not 0, 1, or the missing token."""


class ResponseValidationError(ResponseDataError):
    """Structurally invalid response data (shape, ids, domain)."""


class Encoding(str, Enum):
    """How a pair of binary responses becomes a network edge.

    POSITIVE_CONCORDANT: edge is 1 only when both responses are 1
    (the product of the two responses).
    ALL_CONCORDANT: edge is 1 when the two responses agree (both 0
    or both 1).
    """

    POSITIVE_CONCORDANT = "prod"
    ALL_CONCORDANT = "concord"


class NetworkAxis(str, Enum):
    """Which family of networks: one per item (over person pairs) or one
    per person (over item pairs)."""

    PER_ITEM = "per-item"
    PER_PERSON = "per-person"


@dataclass(frozen=True)
class ResponseMatrix:
    """An n x p grid of ternary responses (0, 1, missing) with axis labels.

    ``values`` uses int8 with :data:`MISSING` (-1) marking unobserved cells.
    Instances are immutable after construction; the backing array is locked.
    """

    values: np.ndarray
    person_ids: tuple[str, ...]
    item_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.int8)
        if values.ndim != 2:
            raise ResponseValidationError("response values must be a 2-d grid")
        n, p = values.shape
        if n < 2 or p < 2:
            raise ResponseValidationError(
                f"need at least 2 persons and 2 items, got {n} x {p}"
            )
        bad = ~np.isin(values, (0, 1, MISSING))
        if bad.any():
            k, i = np.argwhere(bad)[0]
            raise ResponseValidationError(
                f"response at row {k}, column {i} is {values[k, i]}; "
                "only 0, 1, or missing are allowed"
            )
        if len(self.person_ids) != n:
            raise ResponseValidationError("person_ids length does not match rows")
        if len(self.item_ids) != p:
            raise ResponseValidationError("item_ids length does not match columns")
        for label, ids in (("person", self.person_ids), ("item", self.item_ids)):
            seen: set[str] = set()
            for x in ids:
                if x in seen:
                    raise ResponseValidationError(f"duplicate {label} id {x!r}")
                seen.add(x)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "person_ids", tuple(str(x) for x in self.person_ids))
        object.__setattr__(self, "item_ids", tuple(str(x) for x in self.item_ids))

    @property
    def n_persons(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """Boolean mask of observed cells."""
        return self.values != MISSING

    @property
    def has_missing(self) -> bool:
        return bool((self.values == MISSING).any())

    def sum_scores(self) -> np.ndarray:
        """Per-person count of positive responses (missing cells ignored)."""
        return (self.values == 1).sum(axis=1)

    def positive_counts(self) -> np.ndarray:
        """Per-item count of positive responses (missing cells ignored)."""
        return (self.values == 1).sum(axis=0)

    def content_hash(self) -> str:
        """Stable hex digest of the response grid and both id axes."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.int64(self.values.shape).tobytes())
        h.update(self.values.tobytes())
        h.update("\x1f".join(self.person_ids).encode("utf-8"))
        h.update(b"\x1e")
        h.update("\x1f".join(self.item_ids).encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class PairNetwork:
    """A single symmetric pairwise network.

    ``edges`` is a square int8 grid with entries 0, 1, or :data:`MISSING`.
    The diagonal carries :data:`MISSING`; self-edges are never defined.
    """

    axis: NetworkAxis
    index: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        edges = np.ascontiguousarray(self.edges, dtype=np.int8)
        if edges.ndim != 2 or edges.shape[0] != edges.shape[1]:
            raise ResponseValidationError("network edges must be square")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def size(self) -> int:
        return self.edges.shape[0]


def _parse_cell(token: str, missing_token: str) -> int:
    token = token.strip()
    if token == missing_token:
        return MISSING
    if token == "0":
        return 0
    if token == "1":
        return 1
    raise ValueError(token)


def load_response_csv(
    path: str | Path,
    *,
    missing_token: str = "NA",
    has_person_id_column: bool = False,
) -> ResponseMatrix:
    """Read a response matrix from a UTF-8 comma-separated file.

    The header row carries item ids.  When ``has_person_id_column`` is set the
    first column holds person ids (and its header cell is ignored); otherwise
    persons are labeled ``p1..pn`` in file order.  Cells must be ``0``, ``1``,
    or ``missing_token``.
    """
    values, person_ids, item_ids = parse_response_csv(
        path, missing_token=missing_token, has_person_id_column=has_person_id_column
    )
    return ResponseMatrix(values, person_ids, item_ids)


def parse_response_csv(
    path: str | Path,
    *,
    missing_token: str = "NA",
    has_person_id_column: bool = False,
) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...]]:
    """CSV parsing shared by the strict loader and extension payloads."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ResponseValidationError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    item_ids = header[1:] if has_person_id_column else header
    if not item_ids:
        raise ResponseValidationError(f"{path}: header has no item ids")

    person_ids: list[str] = []
    values = np.empty((len(rows) - 1, len(item_ids)), dtype=np.int8)
    for r, row in enumerate(rows[1:], start=1):
        cells = [c for c in row]
        if has_person_id_column:
            if not cells:
                raise ResponseParseError(f"{path}: row {r + 1} is empty")
            person_ids.append(cells[0].strip())
            cells = cells[1:]
        else:
            person_ids.append(f"p{r}")
        if len(cells) != len(item_ids):
            raise ResponseParseError(
                f"{path}: row {r + 1} has {len(cells)} data cells, "
                f"expected {len(item_ids)}"
            )
        for c, cell in enumerate(cells):
            try:
                values[r - 1, c] = _parse_cell(cell, missing_token)
            except ValueError:
                raise ResponseParseError(
                    f"{path}: bad cell {cell.strip()!r} at row {r + 1}, "
                    f"column {item_ids[c]!r}; expected 0, 1, or "
                    f"{missing_token!r}"
                ) from None
    return values, tuple(person_ids), tuple(item_ids)


def save_response_csv(
    X: ResponseMatrix,
    path: str | Path,
    *,
    missing_token: str = "NA",
    write_person_ids: bool = True,
) -> None:
    """Write a response matrix in the format :func:`load_response_csv` reads."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if write_person_ids:
            writer.writerow(["person", *X.item_ids])
        else:
            writer.writerow(list(X.item_ids))
        for k in range(X.n_persons):
            cells = [
                missing_token if v == MISSING else str(int(v))
                for v in X.values[k]
            ]
            if write_person_ids:
                writer.writerow([X.person_ids[k], *cells])
            else:
                writer.writerow(cells)


def encode_pair(a: int, b: int, enc: Encoding) -> int:
    """Edge value for one response pair; missing propagates from either side."""
    if a == MISSING or b == MISSING:
        return MISSING
    if enc is Encoding.POSITIVE_CONCORDANT:
        return int(a) * int(b)
    return 1 if a == b else 0


def encode_pairs_array(a: np.ndarray, b: np.ndarray, enc: Encoding) -> np.ndarray:
    """Vectorized :func:`encode_pair` over int8 arrays (missing = -1)."""
    a = np.asarray(a, dtype=np.int8)
    b = np.asarray(b, dtype=np.int8)
    if enc is Encoding.POSITIVE_CONCORDANT:
        out = ((a == 1) & (b == 1)).astype(np.int8)
    else:
        out = (a == b).astype(np.int8)
    out[(a == MISSING) | (b == MISSING)] = MISSING
    return out


def materialize_network(
    X: ResponseMatrix,
    axis: NetworkAxis,
    index: int,
    enc: Encoding,
) -> PairNetwork:
    """Build one full pairwise network from the response matrix.

    Per-item networks relate persons through their responses to one item;
    per-person networks relate items through one person's responses.  The
    diagonal is left missing.
    """
    axis = NetworkAxis(axis)
    if axis is NetworkAxis.PER_ITEM:
        if not 0 <= index < X.n_items:
            raise IndexError(f"item index {index} out of range for p={X.n_items}")
        col = X.values[:, index]
        edges = encode_pairs_array(col[:, None], col[None, :], enc)
    else:
        if not 0 <= index < X.n_persons:
            raise IndexError(
                f"person index {index} out of range for n={X.n_persons}"
            )
        row = X.values[index, :]
        edges = encode_pairs_array(row[:, None], row[None, :], enc)
    np.fill_diagonal(edges, MISSING)
    return PairNetwork(axis, index, edges)


@dataclass(frozen=True)
class PairwiseCounts:
    """Contingency summary for a small set of items.

    ``pattern_counts`` maps each response pattern (as a 0/1 string in the
    order the items were listed) to its frequency among persons fully
    observed on those items.  ``pair_totals`` maps each unordered item-index
    pair to (concordant, discordant) person counts.
    """

    items: tuple[int, ...]
    pattern_counts: dict[str, int]
    pair_totals: dict[tuple[int, int], tuple[int, int]]
    n_complete: int


def pairwise_counts(
    X: ResponseMatrix,
    items: list[int] | tuple[int, ...],
    *,
    max_items: int = 4,
) -> PairwiseCounts:
    """Tally response patterns and per-pair concordance over listed items.

    Only persons observed on every listed item contribute, so the pattern
    counts sum to that person count, and concordant + discordant equals it
    for every pair.  The item count is capped (default 4) because the table
    has 2**m cells.
    """
    items = tuple(int(i) for i in items)
    if not 1 <= len(items) <= max_items:
        raise ResponseValidationError(
            f"pairwise_counts takes between 1 and {max_items} items "
            f"(2**m pattern blow-up); got {len(items)}"
        )
    if len(set(items)) != len(items):
        raise ResponseValidationError("listed items must be distinct")
    for i in items:
        if not 0 <= i < X.n_items:
            raise IndexError(f"item index {i} out of range for p={X.n_items}")

    sub = X.values[:, list(items)]
    complete = (sub != MISSING).all(axis=1)
    sub = sub[complete]
    n_complete = int(sub.shape[0])

    pattern_counts = {
        "".join(str(b) for b in bits): 0 for bits in product((0, 1), repeat=len(items))
    }
    for row in sub:
        pattern_counts["".join(str(int(v)) for v in row)] += 1

    pair_totals: dict[tuple[int, int], tuple[int, int]] = {}
    for a, b in combinations(range(len(items)), 2):
        conc = int((sub[:, a] == sub[:, b]).sum())
        pair_totals[(items[a], items[b])] = (conc, n_complete - conc)
    return PairwiseCounts(items, pattern_counts, pair_totals, n_complete)
