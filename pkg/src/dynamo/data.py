"""Time-series containers, lagged design matrices and CSV ingestion.

Also holds the home/away differencing used to turn per-match event counts
into a single per-minute series for one team.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MATCH_MINUTES = 90
EVENT_KEY_COLUMNS = ("team_id", "match_id", "minute", "is_home")


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesMatrix:
    """A T x d block of observations, row t being time t (1-based).

    Normalized time of row t is ``t / T`` so ``tau`` lies in (0, 1].
    """

    values: np.ndarray
    variable_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
            raise DataError(f"expected a non-empty 2-D array, got shape {values.shape}")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            r, c = bad[0]
            raise DataError(f"non-finite value at row {r + 1}, column {c + 1}")
        names = tuple(self.variable_names) or tuple(f"v{i + 1}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} variable names for {values.shape[1]} columns")
        if any(not str(n) for n in names) or len(set(names)) != len(names):
            raise DataError("variable names must be unique and non-empty")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "variable_names", tuple(str(n) for n in names))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def tau(self) -> np.ndarray:
        return np.arange(1, self.T + 1) / self.T

    def index_of(self, name: str) -> int:
        try:
            return self.variable_names.index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}") from None


@dataclass(frozen=True)
class LaggedView:
    """Targets x_t aligned with their lag block [x_{t-1}, ..., x_{t-L}].

    Row ``k`` corresponds to time ``t = L + 1 + k`` of the source series.
    """

    L: int
    rows: np.ndarray
    aligned_targets: np.ndarray
    T: int
    variable_names: tuple[str, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.aligned_targets.shape[1]

    @property
    def n(self) -> int:
        return self.aligned_targets.shape[0]

    @property
    def times(self) -> np.ndarray:
        """Source time index (1-based) of every aligned row."""
        return np.arange(self.L + 1, self.T + 1)

    def row_of(self, t: int) -> int:
        if not self.L + 1 <= t <= self.T:
            raise DataError(f"time {t} outside usable range [{self.L + 1}, {self.T}]")
        return t - self.L - 1


def build_lagged(series: TimeSeriesMatrix, L: int) -> LaggedView:
    if L < 1:
        raise DataError(f"lag must be >= 1, got {L}")
    if L >= series.T:
        raise DataError(f"lag {L} needs more than {series.T} time points")
    X = series.values
    T = series.T
    rows = np.hstack([X[L - k:T - k] for k in range(1, L + 1)])
    return LaggedView(
        L=L,
        rows=_readonly(rows),
        aligned_targets=_readonly(X[L:]),
        T=T,
        variable_names=series.variable_names,
    )


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"cannot parse {cell!r} at row {row}, column {col}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value {cell!r} at row {row}, column {col}")
    return v


def load_csv(path: str | Path, has_header: bool = True) -> TimeSeriesMatrix:
    """Read a rectangular numeric CSV; row order is time order."""
    with open(path, newline="", encoding="utf-8") as fh:
        records = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not records:
        raise DataError(f"{path}: empty file")
    names: tuple[str, ...] = ()
    first_row = 1
    if has_header:
        names = tuple(c.strip() for c in records[0])
        records = records[1:]
        first_row = 2
    if not records:
        raise DataError(f"{path}: no data rows")
    width = len(names) if names else len(records[0])
    values = []
    for i, rec in enumerate(records):
        rownum = first_row + i
        if len(rec) != width:
            raise DataError(f"{path}: row {rownum} has {len(rec)} fields, expected {width}")
        values.append([_parse_float(c.strip(), rownum, j + 1) for j, c in enumerate(rec)])
    return TimeSeriesMatrix(np.array(values, dtype=float), names)


def save_csv(series: TimeSeriesMatrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(series.variable_names)
        for row in series.values:
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class MatchEventTable:
    """Per-minute team statistics, one row per (team, match, minute)."""

    team_id: tuple[str, ...]
    match_id: tuple[str, ...]
    minute: np.ndarray
    is_home: np.ndarray
    stats: np.ndarray
    stat_names: tuple[str, ...]

    def __post_init__(self):
        n = len(self.team_id)
        stats = np.asarray(self.stats, dtype=float).reshape(n, len(self.stat_names))
        if not (len(self.match_id) == len(self.minute) == len(self.is_home) == n):
            raise DataError("event columns have different lengths")
        if not np.all(np.isfinite(stats)):
            raise DataError("non-finite statistic in event table")
        seen = set()
        home_flag: dict[tuple[str, str], bool] = {}
        for team, match, minute, home in zip(self.team_id, self.match_id, self.minute, self.is_home):
            key = (team, match, int(minute))
            if key in seen:
                raise DataError(f"duplicate event row for team={team} match={match} minute={minute}")
            seen.add(key)
            prev = home_flag.setdefault((team, match), bool(home))
            if prev != bool(home):
                raise DataError(f"is_home changes within match {match} for team {team}")
        object.__setattr__(self, "stats", stats)
        object.__setattr__(self, "minute", np.asarray(self.minute, dtype=int))
        object.__setattr__(self, "is_home", np.asarray(self.is_home, dtype=bool))

    def flipped(self) -> "MatchEventTable":
        """Same table with every home/away flag inverted."""
        return MatchEventTable(self.team_id, self.match_id, self.minute, ~self.is_home,
                               self.stats, self.stat_names)


def _parse_minute(cell: str, bin_added_time: bool) -> int | None:
    cell = cell.strip()
    if "+" in cell:
        base, _, _ = cell.partition("+")
        base_min = int(base)
        # added time is only kept when binned into the end of its half
        return base_min if bin_added_time else None
    return int(float(cell))


def load_events(path: str | Path, bin_added_time: bool = False) -> MatchEventTable:
    """Read an event CSV: team_id, match_id, minute, is_home, then statistics.

    Minutes written as ``45+2`` are dropped unless ``bin_added_time`` is set,
    in which case they are folded into minute 45 (or 90).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if tuple(header[:4]) != EVENT_KEY_COLUMNS or len(header) < 5:
            raise DataError(f"{path}: header must start with {','.join(EVENT_KEY_COLUMNS)} "
                            "followed by at least one statistic")
        stat_names = tuple(header[4:])
        acc: dict[tuple[str, str, int], np.ndarray] = {}
        flags: dict[tuple[str, str], bool] = {}
        for i, rec in enumerate(reader, start=2):
            if not rec or not any(c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: row {i} has {len(rec)} fields, expected {len(header)}")
            try:
                minute = _parse_minute(rec[2], bin_added_time)
            except ValueError:
                raise DataError(f"cannot parse minute {rec[2]!r} at row {i}, column 3") from None
            if minute is None:
                continue
            home = rec[3].strip()
            if home not in ("0", "1"):
                raise DataError(f"is_home must be 0 or 1, got {home!r} at row {i}, column 4")
            vals = np.array([_parse_float(c.strip(), i, j + 5) for j, c in enumerate(rec[4:])])
            team, match = rec[0].strip(), rec[1].strip()
            key = (team, match, minute)
            if key in acc:
                if "+" not in rec[2]:
                    raise DataError(f"duplicate event row for team={team} match={match} minute={minute}")
                acc[key] = acc[key] + vals
            else:
                acc[key] = vals
            if flags.setdefault((team, match), home == "1") != (home == "1"):
                raise DataError(f"is_home changes within match {match} for team {team} at row {i}")
    keys = list(acc)
    return MatchEventTable(
        team_id=tuple(k[0] for k in keys),
        match_id=tuple(k[1] for k in keys),
        minute=np.array([k[2] for k in keys], dtype=int),
        is_home=np.array([flags[(k[0], k[1])] for k in keys], dtype=bool),
        stats=np.array([acc[k] for k in keys]).reshape(len(keys), len(stat_names)),
        stat_names=stat_names,
    )


def home_away_difference(events: MatchEventTable, team: str, strict: bool = False) -> TimeSeriesMatrix:
    """Per-minute home-minus-away mean series for ``team``.

    Each match contributes ``(2 / N)`` times its per-minute statistics, with a
    plus sign at home and a minus sign away, where N is the team's number of
    matches.  Minutes past 90 are discarded.  Missing minutes count as zero
    unless ``strict`` is set.
    """
    mask = np.array([tm == team for tm in events.team_id], dtype=bool)
    if not mask.any():
        raise DataError(f"team {team!r} not present in event table")
    per_match: dict[str, dict[int, np.ndarray]] = defaultdict(dict)
    home_of: dict[str, bool] = {}
    k = len(events.stat_names)
    for idx in np.flatnonzero(mask):
        minute = int(events.minute[idx])
        match = events.match_id[idx]
        home_of[match] = bool(events.is_home[idx])
        if 1 <= minute <= MATCH_MINUTES:
            per_match[match][minute] = events.stats[idx]
        else:
            per_match.setdefault(match, {})
    n_matches = len(home_of)
    if n_matches == 0:
        raise DataError(f"team {team!r} has no matches")
    out = np.zeros((MATCH_MINUTES, k))
    for match, minutes in per_match.items():
        if strict:
            missing = sorted(set(range(1, MATCH_MINUTES + 1)) - set(minutes))
            if missing:
                raise DataError(f"match {match} of team {team!r} lacks minutes {missing[:5]}...")
        sign = 1.0 if home_of[match] else -1.0
        for minute, vals in minutes.items():
            out[minute - 1] += sign * vals
    out *= 2.0 / n_matches
    return TimeSeriesMatrix(out, events.stat_names)


def series_from_array(values: np.ndarray, names: Sequence[str] | None = None) -> TimeSeriesMatrix:
    return TimeSeriesMatrix(np.asarray(values, dtype=float), tuple(names or ()))
