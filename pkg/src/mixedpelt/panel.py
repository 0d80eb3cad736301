"""Grouped multivariate time-series panels.

A panel is an ``n x P`` matrix of observations whose columns are series
belonging to ``K`` groups. Groups always occupy contiguous column ranges in
group order; the loader reorders columns to get there and remembers the
original order so results can be reported against the input file.

Segments use the half-open-left convention: segment ``(s, e]`` covers the
1-based time indices ``s + 1 .. e``, i.e. the 0-based rows ``s .. e - 1``.
"""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve_toeplitz

__all__ = [
    "PanelError",
    "GroupSpec",
    "TimeSeriesPanel",
    "Segmentation",
    "load_csv",
    "write_csv",
    "load_groups",
    "write_groups",
    "demean",
    "prewhiten_ar",
    "slice_panel",
]

CONTINUOUS = "continuous"
BINARY = "binary"
_KINDS = (CONTINUOUS, BINARY)


class PanelError(ValueError):
    """Invalid panel input or precondition violation."""


@dataclass(frozen=True)
class GroupSpec:
    """Group sizes ``k_1..k_K`` and their labels.

    ``members`` optionally lists the column names of each group; it is filled
    when the spec comes from a sidecar file and is used by :func:`load_csv`
    to reorder columns.
    """

    sizes: tuple[int, ...]
    labels: tuple[str, ...] = ()
    members: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        sizes = tuple(int(k) for k in self.sizes)
        if len(sizes) < 1:
            raise PanelError("a group spec needs at least one group")
        if any(k < 1 for k in sizes):
            raise PanelError(f"group sizes must be positive, got {sizes}")
        labels = tuple(self.labels) or tuple(f"group{i + 1}" for i in range(len(sizes)))
        if len(labels) != len(sizes):
            raise PanelError("number of labels does not match number of groups")
        if self.members is not None:
            members = tuple(tuple(m) for m in self.members)
            if tuple(len(m) for m in members) != sizes:
                raise PanelError("group members do not match group sizes")
            object.__setattr__(self, "members", members)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_members(cls, groups: dict[str, Sequence[str]]) -> "GroupSpec":
        labels = tuple(groups)
        members = tuple(tuple(groups[g]) for g in labels)
        return cls(tuple(len(m) for m in members), labels, members)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def P(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        """Column offsets; group ``u`` spans ``offsets[u]:offsets[u + 1]``."""
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    @property
    def group_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.K), self.sizes)

    def indicator(self) -> np.ndarray:
        """The ``P x K`` 0/1 group-indicator matrix."""
        Z = np.zeros((self.P, self.K))
        Z[np.arange(self.P), self.group_of] = 1.0
        return Z

    def require_pairs(self):
        """Block estimators need at least two series per group."""
        if min(self.sizes) < 2:
            raise PanelError(
                f"every group needs k_i >= 2 for block covariance estimation, got {self.sizes}")


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """Immutable ``n x P`` panel with group-contiguous columns.

    Attributes
    ----------
    values : ndarray
        Read-only ``(n, P)`` float array.
    groups : GroupSpec
        Group sizes and labels; column ``j`` belongs to ``groups.group_of[j]``.
    kind : str
        ``"continuous"`` or ``"binary"``.
    columns : tuple of str
        Series names in panel (group) order.
    order : ndarray
        ``order[j]`` is the position of panel column ``j`` in the source file.
    """

    values: np.ndarray
    groups: GroupSpec
    kind: str = CONTINUOUS
    columns: tuple[str, ...] = ()
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise PanelError("panel values must be a 2-d array")
        n, P = values.shape
        if self.kind not in _KINDS:
            raise PanelError(f"unknown panel kind {self.kind!r}")
        if self.groups.P != P:
            raise PanelError(
                f"group spec width mismatch: sum of group sizes is {self.groups.P}, panel has {P} columns")
        if not np.all(np.isfinite(values)):
            raise PanelError("panel contains missing or non-finite values")
        if self.kind == BINARY and not np.all((values == 0) | (values == 1)):
            raise PanelError("binary panel contains values other than 0 and 1")
        columns = tuple(self.columns) or tuple(f"y{j + 1}" for j in range(P))
        if len(columns) != P:
            raise PanelError("number of column names does not match panel width")
        order = np.arange(P) if self.order is None else np.asarray(self.order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(P)):
            raise PanelError("column order must be a permutation")
        values.setflags(write=False)
        order.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def P(self) -> int:
        return self.values.shape[1]

    @property
    def K(self) -> int:
        return self.groups.K

    @property
    def group_of(self) -> np.ndarray:
        return self.groups.group_of

    def replace_values(self, values: np.ndarray) -> "TimeSeriesPanel":
        return TimeSeriesPanel(values, self.groups, self.kind, self.columns, self.order)

    def slice(self, s: int, e: int) -> "TimeSeriesPanel":
        """Rows ``s + 1 .. e`` (1-based) as a new panel."""
        if not (0 <= s < e <= self.n):
            raise PanelError(f"invalid segment ({s}, {e}] for a panel of length {self.n}")
        return self.replace_values(self.values[s:e])

    def in_original_order(self) -> np.ndarray:
        out = np.empty_like(self.values)
        out[:, self.order] = self.values
        return out

    def equals(self, other: "TimeSeriesPanel") -> bool:
        return (
            self.kind == other.kind
            and self.groups.sizes == other.groups.sizes
            and self.groups.labels == other.groups.labels
            and self.columns == other.columns
            and np.array_equal(self.order, other.order)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class Segmentation:
    """Interior changepoints ``0 < tau_1 < ... < tau_M < n``."""

    changepoints: tuple[int, ...]
    n: int

    def __post_init__(self):
        cps = tuple(int(c) for c in self.changepoints)
        if any(c <= 0 or c >= self.n for c in cps):
            raise PanelError(f"changepoints must lie strictly inside (0, {self.n})")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise PanelError("changepoints must be strictly increasing")
        object.__setattr__(self, "changepoints", cps)

    @property
    def M(self) -> int:
        return len(self.changepoints)

    @property
    def boundaries(self) -> tuple[int, ...]:
        return (0,) + self.changepoints + (self.n,)

    def segments(self) -> list[tuple[int, int]]:
        b = self.boundaries
        return list(zip(b[:-1], b[1:]))

    def labels(self) -> np.ndarray:
        """Segment index of every time point (length ``n``)."""
        out = np.empty(self.n, dtype=np.int64)
        for m, (s, e) in enumerate(self.segments()):
            out[s:e] = m
        return out


def slice_panel(panel: TimeSeriesPanel, s: int, e: int) -> TimeSeriesPanel:
    """Module-level alias of :meth:`TimeSeriesPanel.slice`."""
    return panel.slice(s, e)


def load_csv(path, groups: GroupSpec, kind: str = CONTINUOUS) -> TimeSeriesPanel:
    """Read a headered CSV panel.

    If ``groups.members`` names the columns of each group, columns are
    reordered to be group-contiguous; otherwise the file order is taken to be
    group order already.
    """
    path = os.fspath(path)
    if kind not in _KINDS:
        raise PanelError(f"unknown panel kind {kind!r}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PanelError(f"{path}: cannot read file ({exc.strerror})") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise PanelError(f"{path}: empty CSV file")
    header = [h.strip() for h in rows[0]]
    P = len(header)
    if len(set(header)) != P:
        raise PanelError(f"{path}: duplicate column names in header")
    if groups.P != P:
        raise PanelError(
            f"{path}: group spec width mismatch (sum of group sizes {groups.P} != {P} columns)")
    if len(rows) < 2:
        raise PanelError(f"{path}: no data rows")
    data = np.empty((len(rows) - 1, P))
    for i, row in enumerate(rows[1:]):
        if len(row) != P:
            raise PanelError(f"{path}: ragged row {i + 2} has {len(row)} fields, expected {P}")
        try:
            data[i] = [float(x) for x in row]
        except ValueError as exc:
            raise PanelError(f"{path}: non-numeric cell in row {i + 2}: {exc}") from exc

    if groups.members is not None:
        index = {h: j for j, h in enumerate(header)}
        missing = [c for m in groups.members for c in m if c not in index]
        if missing:
            raise PanelError(f"{path}: group spec names unknown columns {missing}")
        order = np.array([index[c] for m in groups.members for c in m], dtype=np.int64)
        if len(set(order.tolist())) != P:
            raise PanelError(f"{path}: a column is assigned to more than one group")
    else:
        order = np.arange(P)
    try:
        return TimeSeriesPanel(data[:, order], groups, kind, tuple(header[j] for j in order), order)
    except PanelError as exc:
        raise PanelError(f"{path}: {exc}") from exc


def write_csv(panel: TimeSeriesPanel, path) -> None:
    """Write ``panel`` in its original column order (inverse of :func:`load_csv`)."""
    P = panel.P
    header = [None] * P
    for j, pos in enumerate(panel.order):
        header[pos] = panel.columns[j]
    values = panel.in_original_order()
    if panel.kind == BINARY:
        fmt = lambda x: str(int(x))  # noqa: E731
    else:
        fmt = repr
    with open(os.fspath(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in values:
            w.writerow([fmt(float(x)) for x in row])


def load_groups(path) -> GroupSpec:
    """Read a group sidecar file.

    The file is INI-style with a single ``[groups]`` section; each key is a
    group label and its value a comma-separated list of column names::

        [groups]
        acc_left = r1, r2, r3
        pcc_left = r4, r5
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise PanelError(f"{path}: cannot read group spec ({exc.strerror})") from exc
    except configparser.Error as exc:
        raise PanelError(f"{path}: malformed group spec: {exc}") from exc
    if not parser.has_section("groups"):
        raise PanelError(f"{path}: group spec needs a [groups] section")
    groups = {}
    for label, value in parser.items("groups"):
        cols = [c.strip() for c in value.split(",") if c.strip()]
        if not cols:
            raise PanelError(f"{path}: group {label!r} lists no columns")
        groups[label] = cols
    if not groups:
        raise PanelError(f"{path}: group spec defines no groups")
    return GroupSpec.from_members(groups)


def write_groups(groups: GroupSpec, columns: Sequence[str], path) -> None:
    off = groups.offsets
    lines = ["[groups]"]
    for u, label in enumerate(groups.labels):
        lines.append(f"{label} = " + ", ".join(columns[off[u]:off[u + 1]]))
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _require_continuous(panel: TimeSeriesPanel, what: str):
    if panel.kind != CONTINUOUS:
        raise PanelError(f"{what} needs a continuous panel, got {panel.kind}")


def demean(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Subtract each column's sample mean."""
    _require_continuous(panel, "demean")
    x = panel.values - panel.values.mean(axis=0)
    # a second pass removes the rounding residue of the first
    x = x - x.mean(axis=0)
    return panel.replace_values(x)


def _yule_walker(x: np.ndarray, order: int) -> np.ndarray:
    n = len(x)
    xc = x - x.mean()
    acov = np.array([xc[: n - h] @ xc[h:] for h in range(order + 1)]) / n
    if acov[0] <= 0:
        raise LinAlgError("zero variance")
    phi = solve_toeplitz(acov[:order], acov[1 : order + 1])
    if not np.all(np.isfinite(phi)):
        raise LinAlgError("singular autocovariance")
    return phi


def prewhiten_ar(panel: TimeSeriesPanel, order: int) -> TimeSeriesPanel:
    """Replace every column by its Yule-Walker AR(``order``) residuals.

    The first ``order`` rows have no residual and are dropped from every
    column; each residual series is then scaled to unit sample variance
    (``ddof=1``).
    """
    _require_continuous(panel, "prewhitening")
    order = int(order)
    n = panel.n
    if order < 1:
        raise PanelError("AR order must be a positive integer")
    if order >= n - 1:
        raise PanelError(f"AR order {order} too large for series of length {n}")
    out = np.empty((n - order, panel.P))
    for j in range(panel.P):
        x = panel.values[:, j]
        try:
            phi = _yule_walker(x, order)
        except (LinAlgError, ValueError) as exc:
            raise PanelError(
                f"column {panel.columns[j]!r}: numerically singular autocovariance") from exc
        resid = x[order:].copy()
        for i in range(order):
            resid -= phi[i] * x[order - 1 - i : n - 1 - i]
        sd = resid.std(ddof=1)
        if not sd > 0:
            raise PanelError(f"column {panel.columns[j]!r}: residuals have zero variance")
        out[:, j] = resid / sd
    return panel.replace_values(out)
