"""Time-series panels, CSV ingestion, block plans and regression samples.

Time is 1-indexed in every public structure (``BlockPlan.sample_points``,
``RegressionSamples.times``), matching the usual ``x^{(1)}, ..., x^{(T)}``
notation. Array storage is 0-indexed, so time ``t`` lives in column ``t - 1``.

Design matrices list each series' lag window in ascending time order
(``x^{(s-l_max)}, ..., x^{(s-1)}``). Fitted coefficient vectors elsewhere in
the package are stored in ``LagSpec`` order instead; :func:`lag_order` maps
one to the other.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import (
    DuplicateSeriesError,
    EmptyPlanError,
    FormatError,
    MissingDataError,
    ParseError,
    ShapeError,
)

HOURLY_LAGS = np.concatenate([np.arange(1, 25), np.arange(7 * 24, 8 * 24), np.arange(14 * 24, 15 * 24)])
FIVEMIN_LAGS = np.concatenate([np.arange(1, 12), np.arange(12, 15), np.arange(24, 27)])


@dataclass(frozen=True)
class TimeSeriesDataset:
    """``n x T`` panel of real values, one row per series."""

    values: np.ndarray
    series_ids: tuple = ()
    granularity: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"values must be a non-empty n x T matrix, got shape {values.shape}")
        if np.isnan(values).any():
            raise MissingDataError("dataset contains NaN entries")
        values.setflags(write=False)
        ids = tuple(str(s) for s in self.series_ids) or tuple(f"series_{i}" for i in range(values.shape[0]))
        if len(ids) != values.shape[0]:
            raise ShapeError(f"{len(ids)} series ids for {values.shape[0]} series")
        if len(set(ids)) != len(ids):
            raise DuplicateSeriesError("series ids must be unique")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "series_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def head(self, t: int) -> "TimeSeriesDataset":
        """First ``t`` time points."""
        return TimeSeriesDataset(self.values[:, :t], self.series_ids, self.granularity)

    def subset(self, rows: Sequence[int]) -> "TimeSeriesDataset":
        rows = list(rows)
        return TimeSeriesDataset(self.values[rows], [self.series_ids[r] for r in rows], self.granularity)


@dataclass(frozen=True)
class LagSpec:
    """Strictly increasing positive lag offsets, e.g. ``(1, 2, 24)``."""

    lag_indices: tuple

    def __post_init__(self):
        lags = tuple(int(x) for x in np.atleast_1d(np.asarray(self.lag_indices)).tolist())
        if not lags:
            raise ValueError("at least one lag is required")
        if lags[0] < 1 or any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError(f"lag indices must be strictly increasing positive integers, got {lags}")
        object.__setattr__(self, "lag_indices", lags)

    @classmethod
    def contiguous(cls, d: int) -> "LagSpec":
        return cls(tuple(range(1, d + 1)))

    @property
    def d(self) -> int:
        return len(self.lag_indices)

    @property
    def max_lag(self) -> int:
        return self.lag_indices[-1]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.lag_indices, dtype=np.int64)

    def validate_for(self, T: int) -> None:
        if self.max_lag > T - 1:
            raise ValueError(f"max lag {self.max_lag} needs at least {self.max_lag + 1} time points, got T={T}")


@dataclass(frozen=True)
class BlockPlan:
    """One sample time per block of length ``b`` (1-indexed times)."""

    b: int
    sample_points: tuple
    n_blocks: int
    dropped: int = 0

    @property
    def N(self) -> int:
        return len(self.sample_points)


Plan = Union[BlockPlan, str, None]


@dataclass
class RegressionSamples:
    """Design matrix and targets for one least-squares problem.

    ``targets`` is a vector, or an ``N x m`` matrix for a stacked cluster
    design (one column per member). ``lag_spec`` is set when the design
    columns are lag windows in ascending time order; it is ``None`` for
    designs whose columns carry no time structure.
    """

    design: np.ndarray
    targets: np.ndarray
    times: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    series: tuple = ()
    lag_spec: LagSpec | None = None

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.design.ndim != 2 or self.design.shape[0] != self.targets.shape[0]:
            raise ShapeError(
                f"design rows {self.design.shape} do not match targets {self.targets.shape}"
            )

    @property
    def n_samples(self) -> int:
        return self.design.shape[0]


def lag_order(coef: np.ndarray, d: int) -> np.ndarray:
    """Reverse each length-``d`` block: ascending-time order <-> lag order.

    The map is an involution, so it converts in both directions.
    """
    coef = np.asarray(coef)
    lead = coef.shape[:-1]
    blocks = coef.reshape(*lead, -1, d)
    return blocks[..., ::-1].reshape(coef.shape).copy()


# --------------------------------------------------------------------------- CSV

_MISSING = ("", "nan", "na")


def _is_label(cell: str) -> bool:
    cell = cell.strip()
    if cell.lower() in _MISSING:
        return False
    try:
        float(cell)
    except ValueError:
        return True
    return False


def _parse_table(text: str, id_column: bool):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError("empty CSV")
    header = None
    first = rows[0][1:] if id_column else rows[0]
    # a header row holds only labels; a mix of labels and numbers is bad data
    if first and all(_is_label(c) for c in first):
        header, rows = rows[0], rows[1:]
    if not rows:
        raise FormatError("CSV has a header but no data rows")
    width = len(rows[0])
    ids = []
    data = []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise FormatError(f"row {lineno} has {len(row)} cells, expected {width}")
        if id_column:
            ids.append(row[0].strip())
            row = row[1:]
        parsed = []
        for cell in row:
            cell = cell.strip()
            if cell.lower() in _MISSING:
                raise MissingDataError(f"missing value on row {lineno}")
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r} on row {lineno}") from None
        data.append(parsed)
    values = np.array(data, dtype=np.float64)
    if np.isnan(values).any():
        raise MissingDataError("NaN in CSV")
    return header, ids, values


def load_csv(path, layout: str = "row-major", id_column: bool = False, granularity: str = "") -> TimeSeriesDataset:
    """Read a panel from CSV.

    ``row-major``: one series per row. ``column-major``: one series per
    column; a header row then names the series. A first row made only of
    non-numeric labels is treated as a header.
    """
    if layout not in ("row-major", "column-major"):
        raise ValueError(f"unknown layout {layout!r}")
    text = Path(path).read_text()
    header, ids, values = _parse_table(text, id_column)
    if layout == "row-major":
        series_ids = ids
    else:
        values = values.T
        series_ids = []
        if header is not None:
            series_ids = header[1:] if id_column else header
            series_ids = [s.strip() for s in series_ids]
    return TimeSeriesDataset(values, tuple(series_ids), granularity)


def write_csv(ds: TimeSeriesDataset, path, id_column: bool = False) -> None:
    """Row-major CSV; ``repr`` keeps every finite double bit-exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for sid, row in zip(ds.series_ids, ds.values):
            cells = [repr(float(v)) for v in row]
            writer.writerow([sid, *cells] if id_column else cells)


# ------------------------------------------------------------------- sampling

def make_blocks(T: int, b: int, lag_spec: LagSpec, placement: str = "last", seed=None) -> BlockPlan:
    """Split ``1..T`` into ``floor(T/b)`` blocks and pick one sample time in each.

    ``placement="last"`` uses ``s_j = j*b``; ``"random"`` draws ``s_j``
    uniformly inside block ``j`` from ``seed``. Blocks whose sample time has
    too little history for the lags are dropped.
    """
    if b < 1:
        raise ValueError("block length must be positive")
    if b > T:
        raise EmptyPlanError(f"block length {b} exceeds series length {T}")
    n_blocks = T // b
    if placement == "last":
        points = [j * b for j in range(1, n_blocks + 1)]
    elif placement == "random":
        rng = np.random.default_rng(seed)
        points = [int((j - 1) * b + 1 + rng.integers(b)) for j in range(1, n_blocks + 1)]
    else:
        raise ValueError(f"unknown placement {placement!r}")
    kept = tuple(s for s in points if s - lag_spec.max_lag >= 1)
    if not kept:
        raise EmptyPlanError("no block has enough history for the requested lags")
    return BlockPlan(b=b, sample_points=kept, n_blocks=n_blocks, dropped=n_blocks - len(kept))


def default_block_size(lag_spec: LagSpec) -> int:
    return lag_spec.max_lag + 1


def sample_times(T: int, lag_spec: LagSpec, plan: Plan) -> np.ndarray:
    """1-indexed target times for a plan (``"sliding"`` = every valid t)."""
    if plan is None or plan == "sliding":
        lag_spec.validate_for(T)
        return np.arange(lag_spec.max_lag + 1, T + 1, dtype=np.int64)
    if isinstance(plan, BlockPlan):
        times = np.asarray(plan.sample_points, dtype=np.int64)
        if times.size and (times.max() > T or times.min() - lag_spec.max_lag < 1):
            raise ValueError("block plan does not fit this dataset and lag spec")
        return times
    raise ValueError(f"unknown plan {plan!r}")


def _windows(values: np.ndarray, times: np.ndarray, lag_spec: LagSpec) -> np.ndarray:
    # columns in ascending time: largest lag first
    offsets = lag_spec.array[::-1]
    idx = times[:, None] - offsets[None, :] - 1
    return values[..., idx]


def extract_ar_samples(ds: TimeSeriesDataset, series: int, lag_spec: LagSpec, plan: Plan = "sliding") -> RegressionSamples:
    if not 0 <= series < ds.n:
        raise IndexError(f"series index {series} out of range for n={ds.n}")
    times = sample_times(ds.T, lag_spec, plan)
    x = ds.values[series]
    return RegressionSamples(
        design=_windows(x, times, lag_spec),
        targets=x[times - 1],
        times=times,
        series=(series,),
        lag_spec=lag_spec,
    )


def extract_var_samples(
    ds: TimeSeriesDataset,
    members: Sequence[int],
    lag_spec: LagSpec,
    plan: Plan = "sliding",
    target: int | None = None,
) -> RegressionSamples:
    """Cluster design: each row concatenates the members' lag windows.

    Blocks follow ``members`` order. With ``target`` set, targets are that
    series' values; otherwise an ``N x m`` target matrix (stacked design).
    """
    members = [int(i) for i in members]
    if not members:
        raise ValueError("members must be non-empty")
    if len(set(members)) != len(members):
        raise DuplicateSeriesError(f"duplicate series in members {members}")
    for i in members:
        if not 0 <= i < ds.n:
            raise IndexError(f"series index {i} out of range for n={ds.n}")
    times = sample_times(ds.T, lag_spec, plan)
    win = _windows(ds.values[members], times, lag_spec)  # m x N x d
    design = np.ascontiguousarray(win.transpose(1, 0, 2)).reshape(times.size, len(members) * lag_spec.d)
    if target is None:
        targets = ds.values[members][:, times - 1].T.copy()
    else:
        if target not in members:
            raise ValueError("target must be one of the members")
        targets = ds.values[target, times - 1]
    return RegressionSamples(design=design, targets=targets, times=times, series=tuple(members), lag_spec=lag_spec)
