"""Repeated cross-sectional data: layout, dataset, aggregation, CSV I/O.

Groups are indexed 1..K with the treated groups occupying the last K_tr
positions; periods are indexed 1..T with the first T_pre pre-treatment.
All downstream weight formulas index by position, so ingestion re-indexes
arbitrary group/time labels into this convention.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

__all__ = [
    "PanelLayout",
    "RCDataset",
    "AggregatedPanel",
    "SchemaError",
    "ValidationError",
    "load_long_csv",
    "write_long_csv",
    "aggregate",
]


class SchemaError(ValueError):
    """A required column is missing or unusable."""


class ValidationError(ValueError):
    """Data violate the balanced group-period structure."""


@dataclass(frozen=True)
class PanelLayout:
    """Dimensions of the group-period grid.

    Treated groups are, by convention, the last ``k_tr`` group indices;
    post-treatment periods are the last ``t_post`` period indices.
    """

    k_co: int
    k_tr: int
    t_pre: int
    t_post: int

    def __post_init__(self):
        if self.k_co < 1:
            raise ValidationError("need at least one control group")
        if self.k_tr < 1:
            raise ValidationError("need at least one treated group")
        if self.t_pre < 2:
            raise ValidationError(
                "need at least two pre-treatment periods (regularization "
                "level uses first differences of pre-period means)"
            )
        if self.t_post < 1:
            raise ValidationError("need at least one post-treatment period")

    @property
    def k(self) -> int:
        return self.k_co + self.k_tr

    @property
    def t(self) -> int:
        return self.t_pre + self.t_post

    @property
    def treated_groups(self) -> range:
        """1-based ids of the treated groups."""
        return range(self.k_co + 1, self.k + 1)

    def is_treated_cell(self) -> np.ndarray:
        """K x T boolean matrix of treatment exposure."""
        w = np.zeros((self.k, self.t), dtype=bool)
        w[self.k_co:, self.t_pre:] = True
        return w


@dataclass(frozen=True)
class RCDataset:
    """Individual-level repeated cross-sections.

    ``group`` and ``time`` are 1-based integer indices; rows in the same
    (group, time) cell belong to the same cross-sectional cell.
    Immutable after construction; safe to share across threads.
    """

    group: np.ndarray
    time: np.ndarray
    outcome: np.ndarray
    layout: PanelLayout
    group_labels: tuple = field(default=(), compare=False)
    time_labels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        g = np.ascontiguousarray(self.group, dtype=np.int64)
        t = np.ascontiguousarray(self.time, dtype=np.int64)
        y = np.ascontiguousarray(self.outcome, dtype=np.float64)
        if not (g.shape == t.shape == y.shape) or g.ndim != 1:
            raise ValidationError("group, time, outcome must be 1-d and equal length")
        object.__setattr__(self, "group", g)
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "outcome", y)
        for arr in (g, t, y):
            arr.setflags(write=False)
        lay = self.layout
        if g.size == 0:
            raise ValidationError("dataset has no rows")
        if g.min() < 1 or g.max() > lay.k:
            raise ValidationError("group id out of layout bounds")
        if t.min() < 1 or t.max() > lay.t:
            raise ValidationError("time id out of layout bounds")
        counts = np.bincount((g - 1) * lay.t + (t - 1), minlength=lay.k * lay.t)
        if counts.min() == 0:
            cell = int(np.argmin(counts))
            raise ValidationError(
                f"empty cell ({cell // lay.t + 1},{cell % lay.t + 1})"
            )

    @property
    def n_rows(self) -> int:
        return self.outcome.size


@dataclass(frozen=True)
class AggregatedPanel:
    """Cell means and counts on the K x T grid."""

    means: np.ndarray
    counts: np.ndarray
    layout: PanelLayout

    def __post_init__(self):
        m = np.ascontiguousarray(self.means, dtype=np.float64)
        c = np.ascontiguousarray(self.counts, dtype=np.int64)
        shape = (self.layout.k, self.layout.t)
        if m.shape != shape or c.shape != shape:
            raise ValidationError(f"means/counts must have shape {shape}")
        if c.min() < 1:
            raise ValidationError("every cell needs at least one observation")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "counts", c)
        m.setflags(write=False)
        c.setflags(write=False)

    @property
    def n_obs(self) -> int:
        return int(self.counts.sum())


def aggregate(data: RCDataset) -> AggregatedPanel:
    """Cell means and counts of ``data``.

    Rows are grouped by cell (a stable sort, skipped when the input is
    already cell-ordered) and summed per cell; shuffling rows can move the
    means only at the accumulation-roundoff level (< 1e-12 relative).
    """
    lay = data.layout
    idx = (data.group - 1) * lay.t + (data.time - 1)
    if idx.size > 1 and np.any(np.diff(idx) < 0):
        order = np.argsort(idx, kind="stable")
        y = data.outcome[order]
    else:
        y = data.outcome
    counts = np.bincount(idx, minlength=lay.k * lay.t)
    starts = np.concatenate(([0], np.cumsum(counts[:-1])))
    sums = np.add.reduceat(y, starts)
    means = (sums / counts).reshape(lay.k, lay.t)
    return AggregatedPanel(means=means, counts=counts.reshape(lay.k, lay.t), layout=lay)


def _reindex(values: np.ndarray):
    labels = pd.unique(values)
    labels = np.sort(labels)
    index = {lab: i + 1 for i, lab in enumerate(labels)}
    codes = np.fromiter((index[v] for v in values), dtype=np.int64, count=len(values))
    return codes, tuple(labels.tolist())


def load_long_csv(
    path,
    k_co: int | None = None,
    t_pre: int | None = None,
    group_col: str = "group",
    time_col: str = "time",
    outcome_col: str = "outcome",
    treated_col: str | None = None,
) -> RCDataset:
    """Load a long-format CSV into an :class:`RCDataset`.

    Group/time labels are re-indexed to contiguous 1-based integers (sorted
    by label); treated groups are moved to the last positions. The treated
    set comes either from ``k_co`` (labels are assumed already ordered with
    treated groups last) or from a 0/1 ``treated_col`` constant within
    group. ``t_pre`` is always required.
    """
    if not os.path.exists(path):
        raise SchemaError(f"input file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip")
    for col in (group_col, time_col, outcome_col):
        if col not in df.columns:
            raise SchemaError(f"missing column '{col}' in {path}")
    if treated_col is not None and treated_col not in df.columns:
        raise SchemaError(f"missing column '{treated_col}' in {path}")
    if (k_co is None) == (treated_col is None):
        raise SchemaError("exactly one of k_co or treated_col must be given")
    if t_pre is None:
        raise SchemaError("t_pre is required")

    outcome = pd.to_numeric(df[outcome_col], errors="coerce").to_numpy(dtype=np.float64)
    if np.isnan(outcome).any():
        row = int(np.flatnonzero(np.isnan(outcome))[0])
        raise SchemaError(f"non-numeric outcome at row {row + 2} of {path}")

    g_codes, g_labels = _reindex(df[group_col].to_numpy())
    t_codes, t_labels = _reindex(df[time_col].to_numpy())
    n_groups = len(g_labels)
    n_periods = len(t_labels)

    if treated_col is not None:
        flags = df[treated_col].to_numpy()
        treated = np.zeros(n_groups, dtype=bool)
        for gid in range(1, n_groups + 1):
            vals = np.unique(flags[g_codes == gid])
            if len(vals) != 1 or vals[0] not in (0, 1):
                raise ValidationError(
                    f"treated flag not constant 0/1 within group {g_labels[gid - 1]!r}"
                )
            treated[gid - 1] = bool(vals[0])
        k_tr = int(treated.sum())
        if k_tr == 0:
            raise ValidationError("no treated group found")
        # stable re-order: controls keep relative order, treated go last
        new_pos = np.empty(n_groups, dtype=np.int64)
        new_pos[~treated] = np.arange(1, n_groups - k_tr + 1)
        new_pos[treated] = np.arange(n_groups - k_tr + 1, n_groups + 1)
        g_codes = new_pos[g_codes - 1]
        perm = np.argsort(new_pos)
        g_labels = tuple(g_labels[i] for i in perm)
        k_co_eff = n_groups - k_tr
    else:
        k_co_eff = int(k_co)
        if not 1 <= k_co_eff < n_groups:
            raise ValidationError(
                f"k_co={k_co_eff} incompatible with {n_groups} groups"
            )

    if not 1 <= t_pre < n_periods:
        raise ValidationError(f"t_pre={t_pre} incompatible with {n_periods} periods")

    layout = PanelLayout(
        k_co=k_co_eff,
        k_tr=n_groups - k_co_eff,
        t_pre=int(t_pre),
        t_post=n_periods - int(t_pre),
    )
    return RCDataset(
        group=g_codes,
        time=t_codes,
        outcome=outcome,
        layout=layout,
        group_labels=g_labels,
        time_labels=t_labels,
    )


def write_long_csv(data: RCDataset, path) -> None:
    """Write ``data`` as a long-format CSV (atomic: temp file + rename)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "time", "outcome"])
    # repr gives the shortest string that round-trips the float exactly.
    writer.writerows(
        (int(k), int(t), repr(float(y)))
        for k, t, y in zip(data.group, data.time, data.outcome)
    )
    _atomic_write(path, buf.getvalue())


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
