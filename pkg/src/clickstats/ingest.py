"""Getting detector readings into click-counting form.

Raw pulse energies are mapped to photon numbers with a quadratic calibration,
grouped into outcome intervals, and paired across detectors into coincidence
rows ``(k_1, ..., k_N, count)``.  Coincidences aggregate into occupation
tuples, so ``(0, 1)`` and ``(1, 0)`` land in the same cell.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._io import read_csv
from .engine import (
    ClickDistribution,
    CountsTable,
    HeraldedCounts,
    MultiplexConfig,
    _sorted,
    iter_outcome_assignments,
    occupation_of_outcomes,
)
from .errors import FitError, ParseError, ValidationError


# --- calibration -----------------------------------------------------------


@dataclass(frozen=True)
class CalibrationFit:
    """Photon number as a quadratic function of pulse energy, n = a E^2 + b E + c."""

    a: float
    b: float
    c: float
    residual_rms: float

    def photon_number(self, energy):
        e = np.asarray(energy, dtype=float)
        return self.a * e * e + self.b * e + self.c

    def energy_at(self, n: float) -> float:
        """Energy where the calibration reaches ``n`` on its increasing branch."""
        a, b, c = self.a, self.b, self.c - n
        if abs(a) < 1e-15 * max(1.0, abs(b)):
            if b <= 0:
                raise FitError("calibration is not increasing")
            return -c / b
        disc = b * b - 4 * a * c
        if disc < 0:
            raise FitError(f"calibration never reaches n = {n}")
        # the root with 2aE + b = +sqrt(disc) > 0
        return (-b + math.sqrt(disc)) / (2 * a) if b <= 0 else (-2 * c) / (b + math.sqrt(disc))

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "residual_rms": self.residual_rms}


def fit_quadratic_calibration(points: Iterable[tuple[float, float]]) -> CalibrationFit:
    pts = np.array([(float(e), float(n)) for e, n in points], dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise FitError(f"need at least 3 calibration points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise FitError("calibration points must be finite")
    E, n = pts[:, 0], pts[:, 1]
    if np.unique(E).size < 3:
        raise FitError("need at least 3 distinct energies")
    # column scaling keeps the Vandermonde system well conditioned
    s = float(np.max(np.abs(E)))
    X = np.column_stack([(E / s) ** 2, E / s, np.ones_like(E)])
    coef, _, rank, _ = np.linalg.lstsq(X, n, rcond=None)
    if rank < 3:
        raise FitError("calibration system is rank deficient")
    a, b, c = coef[0] / s**2, coef[1] / s, coef[2]
    resid = X @ coef - n
    return CalibrationFit(float(a), float(b), float(c), float(np.sqrt(np.mean(resid**2))))


def read_calibration_points(path) -> list[tuple[float, float]]:
    header, rows = read_csv(path)
    if header != ["energy", "n"]:
        raise ParseError("expected header energy,n", 1)
    out = []
    for line, fields in rows:
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", line)
        try:
            out.append((float(fields[0]), float(fields[1])))
        except ValueError:
            raise ParseError(f"non-numeric value in {fields}", line) from None
    return out


# --- binning ---------------------------------------------------------------


@dataclass(frozen=True)
class BinningSpec:
    """Outcome k covers the half-open interval [edges[k], edges[k+1])."""

    edges: tuple[float, ...]

    def __post_init__(self):
        e = tuple(float(x) for x in self.edges)
        if len(e) < 2:
            raise ValidationError("need at least two edges")
        if any(math.isnan(x) for x in e) or any(b <= a for a, b in zip(e, e[1:])):
            raise ValidationError("edges must be strictly increasing")
        object.__setattr__(self, "edges", e)

    @property
    def K(self) -> int:
        return len(self.edges) - 2

    @classmethod
    def from_calibration(cls, fit: CalibrationFit, K: int) -> "BinningSpec":
        """Edges at half-integer photon numbers; outcome 0 and outcome K are open-ended."""
        if K < 1:
            raise ValidationError("K must be >= 1")
        inner = [fit.energy_at(k + 0.5) for k in range(K)]
        return cls((-math.inf, *inner, math.inf))

    def outcomes(self, values) -> np.ndarray:
        """Outcome index per reading; -1 below range, K+1 above."""
        v = np.asarray(values, dtype=float)
        idx = np.searchsorted(np.asarray(self.edges), v, side="right") - 1
        return np.clip(idx, -1, self.K + 1)


@dataclass(frozen=True)
class BinnedCounts:
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


def bin_samples(values, spec: BinningSpec) -> BinnedCounts:
    idx = spec.outcomes(values)
    under = int(np.count_nonzero(idx < 0))
    over = int(np.count_nonzero(idx > spec.K))
    inside = idx[(idx >= 0) & (idx <= spec.K)]
    return BinnedCounts(np.bincount(inside, minlength=spec.K + 1).astype(np.int64), under, over)


def read_readings(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for line_num, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                out.append(float(text))
            except ValueError:
                raise ParseError(f"not a number: {text!r}", line_num) from None
    return np.array(out, dtype=float)


def coincidences_from_readings(streams: Sequence, spec: BinningSpec) -> tuple[CountsTable, int]:
    """Pair the i-th reading of every detector into one shot.

    Returns the counts table and the number of shots dropped because some
    reading fell outside the binning range.
    """
    if not streams:
        raise ValidationError("need at least one reading stream")
    arrays = [np.asarray(s, dtype=float) for s in streams]
    if len({a.size for a in arrays}) != 1:
        raise ValidationError("reading streams must have equal length")
    outcomes = np.column_stack([spec.outcomes(a) for a in arrays])
    ok = np.all((outcomes >= 0) & (outcomes <= spec.K), axis=1)
    table: dict = defaultdict(int)
    for row in outcomes[ok]:
        table[occupation_of_outcomes(row.tolist(), spec.K)] += 1
    config = MultiplexConfig(len(arrays), spec.K)
    return CountsTable(config, _sorted(table)), int(np.count_nonzero(~ok))


# --- coincidence files -----------------------------------------------------


@dataclass(frozen=True)
class CoincidenceRows:
    """Rows of a coincidence file before aggregation."""

    N: int
    rows: list  # (herald or None, outcome tuple, count)
    ordered: bool  # True for k_1..k_N rows, False for occupation rows


def _parse_int(text: str, line: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not an integer", line) from None
    if value < 0:
        raise ParseError(f"{what} must be nonnegative", line)
    return value


def read_coincidence_rows(path) -> CoincidenceRows:
    """Parse ``[herald,]k_1..k_N,count`` or ``[herald,]N_0..N_K,count`` files."""
    header, rows = read_csv(path)
    cols = list(header)
    has_herald = bool(cols) and cols[0] == "herald"
    if has_herald:
        cols = cols[1:]
    if len(cols) < 2 or cols[-1] != "count":
        raise ParseError("header must end with a count column", 1)
    cols = cols[:-1]
    if cols == [f"k_{i + 1}" for i in range(len(cols))]:
        ordered = True
    elif cols == [f"N_{i}" for i in range(len(cols))]:
        ordered = False
    else:
        raise ParseError("expected columns k_1..k_N or N_0..N_K before count", 1)
    width = len(header)
    parsed = []
    Ns = set()
    for line, fields in rows:
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, got {len(fields)}", line)
        vals = [_parse_int(f, line, h) for f, h in zip(fields, header)]
        herald = vals[0] if has_herald else None
        outcome = tuple(vals[1:-1] if has_herald else vals[:-1])
        if not ordered:
            Ns.add(sum(outcome))
        parsed.append((herald, outcome, vals[-1], line))
    if ordered:
        N = len(cols)
    else:
        if len(Ns) > 1:
            raise ParseError(f"occupation rows disagree on N: {sorted(Ns)}", 1)
        N = Ns.pop() if Ns else 0
    return CoincidenceRows(N, parsed, ordered)


def _infer_K(raw: CoincidenceRows, K: int | None) -> int:
    if not raw.ordered:
        width = len(raw.rows[0][1]) if raw.rows else 1
        if K is not None and K != width - 1:
            raise ValidationError(f"file has K={width - 1}, requested K={K}")
        return width - 1
    if K is not None:
        return K
    seen = max((max(r[1]) for r in raw.rows if r[1]), default=1)
    return max(seen, 1)


def _aggregate(raw: CoincidenceRows, K: int) -> dict:
    """{herald: {occupation: count}}."""
    out: dict = defaultdict(lambda: defaultdict(int))
    for herald, outcome, count, line in raw.rows:
        if raw.ordered:
            if any(k > K for k in outcome):
                raise ParseError(f"outcome outside [0, {K}]", line)
            occ = occupation_of_outcomes(outcome, K)
        else:
            occ = outcome
        out[herald][occ] += count
    return out


def load_coincidences(path, K: int | None = None) -> CountsTable:
    """Aggregate a coincidence file into a counts table (herald column, if any, is summed out)."""
    raw = read_coincidence_rows(path)
    if raw.N < 1:
        raise ParseError("no coincidence rows", 2)
    K = _infer_K(raw, K)
    merged: dict = defaultdict(int)
    for table in _aggregate(raw, K).values():
        for occ, c in table.items():
            merged[occ] += c
    return CountsTable(MultiplexConfig(raw.N, K), _sorted(merged))


def load_heralded(path, K: int | None = None) -> HeraldedCounts:
    raw = read_coincidence_rows(path)
    if raw.N < 1:
        raise ParseError("no coincidence rows", 2)
    if raw.rows and raw.rows[0][0] is None:
        raise ParseError("file has no herald column", 1)
    K = _infer_K(raw, K)
    config = MultiplexConfig(raw.N, K)
    tables = {l: CountsTable(config, _sorted(t)) for l, t in sorted(_aggregate(raw, K).items())}
    return HeraldedCounts(config, tables)


def has_herald_column(path) -> bool:
    header, _ = read_csv(path)
    return bool(header) and header[0] == "herald"


def _occ_header(K: int) -> list[str]:
    return [f"N_{k}" for k in range(K + 1)] + ["count"]


def save_counts(table: CountsTable, path) -> None:
    """Write the canonical aggregated form ``N_0..N_K,count``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_occ_header(table.config.K))
        for occ, c in _sorted(table.counts).items():
            w.writerow([*occ, c])


def save_heralded(data: HeraldedCounts, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["herald"] + _occ_header(data.config.K))
        for l, table in sorted(data.tables.items()):
            for occ, c in _sorted(table.counts).items():
                w.writerow([l, *occ, c])


def asymmetry_report(path, K: int | None = None) -> list[dict]:
    """Detector-ordering imbalance for every occupation with more than one ordering.

    The imbalance is (max - min)/(max + min) over the orderings of the
    occupation, which for two detectors is |c_1 - c_2|/(c_1 + c_2).
    Orderings absent from the file count as zero.
    """
    raw = read_coincidence_rows(path)
    if not raw.ordered:
        raise ValidationError("asymmetry needs per-detector rows k_1..k_N")
    K = _infer_K(raw, K)
    counts: dict = defaultdict(int)
    for _, outcome, count, line in raw.rows:
        if any(k > K for k in outcome):
            raise ParseError(f"outcome outside [0, {K}]", line)
        counts[outcome] += count
    report = []
    done = set()
    for outcome in sorted(counts):
        occ = occupation_of_outcomes(outcome, K)
        if occ in done:
            continue
        done.add(occ)
        orders = iter_outcome_assignments(occ)
        if len(orders) < 2:
            continue
        cs = [counts.get(o, 0) for o in orders]
        hi, lo = max(cs), min(cs)
        report.append(
            {
                "occupation": list(occ),
                "counts": {",".join(map(str, o)): c for o, c in zip(orders, cs)},
                "asymmetry": (hi - lo) / (hi + lo) if hi + lo else 0.0,
            }
        )
    return report


def save_distribution(dist: ClickDistribution, path) -> None:
    """Exact probabilities as ``N_0..N_K,prob`` with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"N_{k}" for k in range(dist.config.K + 1)] + ["prob"])
        for occ, p in _sorted(dist.probs).items():
            w.writerow([*occ, repr(float(p))])


def load_distribution(path) -> ClickDistribution:
    header, rows = read_csv(path)
    cols = header[:-1]
    if not header or header[-1] != "prob" or cols != [f"N_{k}" for k in range(len(cols))] or not cols:
        raise ParseError("expected header N_0..N_K,prob", 1)
    probs = {}
    Ns = set()
    for line, fields in rows:
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", line)
        occ = tuple(_parse_int(f, line, h) for f, h in zip(fields[:-1], cols))
        try:
            p = float(fields[-1])
        except ValueError:
            raise ParseError(f"probability {fields[-1]!r} is not a number", line) from None
        if not 0 <= p <= 1:
            raise ParseError("probability outside [0, 1]", line)
        Ns.add(sum(occ))
        probs[occ] = probs.get(occ, 0.0) + p
    if len(Ns) != 1:
        raise ParseError("rows must share one N", 2)
    return ClickDistribution(MultiplexConfig(Ns.pop(), len(cols) - 1), _sorted(probs))


def is_distribution_file(path) -> bool:
    header, _ = read_csv(path)
    return bool(header) and header[-1] == "prob"
