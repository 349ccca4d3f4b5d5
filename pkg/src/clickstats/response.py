"""Photon-number-diagonal detector responses in a balanced N-way layout.

Two matrices describe one detector:

``detector[k, m]``
    probability of outcome ``k`` when ``m`` photons reach that detector.
``p[k, n]``
    probability of outcome ``k`` at one detector when ``n`` photons enter the
    layout.  This is ``detector`` composed with binomial routing of each photon
    to the detector with probability ``1/N`` (the ``a -> a/sqrt(N)`` lift).

Outcome ``K`` is a top bin collecting everything that would exceed ``K``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._io import read_csv
from .errors import ParseError, TruncationError, ValidationError

FAMILIES = ("photoelectric", "on_off", "custom")
COMPLETENESS_TOL = 1e-9


FLUSH_BELOW = 1e-300


def _flush(t: float) -> float:
    # scipy's binomial overflows for probabilities at or near the smallest normal float
    return 0.0 if abs(t) < FLUSH_BELOW else t


def _binomial_topbinned(y: float, K: int, n_max: int) -> np.ndarray:
    y = _flush(y)
    n = np.arange(n_max + 1)
    out = np.empty((K + 1, n_max + 1))
    for k in range(K):
        out[k] = stats.binom.pmf(k, n, y)
    out[K] = stats.binom.sf(K - 1, n, y)
    return out


def _onoff(y: float, n_max: int) -> np.ndarray:
    p0 = (1.0 - y) ** np.arange(n_max + 1)
    return np.vstack([p0, 1.0 - p0])


def thinning_matrix(n_max: int, t: float) -> np.ndarray:
    """B[n, m] = P(m of n photons survive a Bernoulli(t) thinning)."""
    n = np.arange(n_max + 1)[:, None]
    m = np.arange(n_max + 1)[None, :]
    return stats.binom.pmf(m, n, _flush(t))


@dataclass(frozen=True)
class ResponseMatrix:
    detector: np.ndarray
    N: int
    family: str = "custom"
    eta: float | None = None
    p: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown detector family {self.family!r}")
        if self.N < 1:
            raise ValidationError("N must be >= 1")
        d = np.array(self.detector, dtype=float)
        _check_povm(d)
        d.setflags(write=False)
        object.__setattr__(self, "detector", d)
        if self.family == "photoelectric":
            lifted = _binomial_topbinned(self.y, self.K, self.n_max)
        elif self.family == "on_off":
            lifted = _onoff(self.y, self.n_max)
        else:
            lifted = d @ thinning_matrix(self.n_max, 1.0 / self.N).T
        lifted.setflags(write=False)
        object.__setattr__(self, "p", lifted)

    @property
    def K(self) -> int:
        return self.detector.shape[0] - 1

    @property
    def n_max(self) -> int:
        return self.detector.shape[1] - 1

    @property
    def y(self) -> float | None:
        """Effective per-detector efficiency eta/N seen from the layout input."""
        return None if self.eta is None else self.eta / self.N

    def with_n_max(self, n_max: int) -> "ResponseMatrix":
        """Same detector model truncated or extended to ``n_max`` photons.

        Parametric families extend freely; a custom matrix can only be cut.
        """
        if n_max == self.n_max:
            return self
        if n_max < self.n_max:
            return ResponseMatrix(self.detector[:, : n_max + 1], self.N, self.family, self.eta)
        if self.family == "photoelectric":
            return photoelectric_response(self.eta, self.N, self.K, n_max)
        if self.family == "on_off":
            return onoff_response(self.eta, self.N, n_max)
        raise TruncationError(
            f"custom response covers n <= {self.n_max}, but n_max={n_max} is required"
        )

    def with_N(self, N: int) -> "ResponseMatrix":
        return ResponseMatrix(self.detector, N, self.family, self.eta)

    def to_csv(self, path) -> None:
        """Write the detector-level matrix: header ``k,0,..,n_max``, one row per outcome."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [str(n) for n in range(self.n_max + 1)])
            for k, row in enumerate(self.detector):
                w.writerow([k] + [repr(float(v)) for v in row])


def _check_povm(d: np.ndarray) -> None:
    if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
        raise ValidationError("response must be a (K+1) x (n_max+1) matrix")
    if not np.all(np.isfinite(d)):
        raise ValidationError("response entries must be finite")
    if np.any(d < 0):
        k, n = np.argwhere(d < 0)[0]
        raise ValidationError(f"negative response entry at k={k}, n={n}")
    if np.any(d > 1):
        raise ValidationError("response entries must be <= 1")
    sums = d.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > COMPLETENESS_TOL)
    if bad.size:
        n = int(bad[0])
        raise ValidationError(f"column n={n} sums to {sums[n]!r}, not 1 (POVM completeness)")


def _check_eff(eta: float, N: int) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValidationError("quantum efficiency must lie in [0, 1]")
    if N < 1:
        raise ValidationError("N must be >= 1")


def photoelectric_response(eta: float, N: int, K: int, n_max: int) -> ResponseMatrix:
    """Linear (binomially thinned) photon counter with top bin ``K``."""
    _check_eff(eta, N)
    if K < 1:
        raise ValidationError("K must be >= 1")
    return ResponseMatrix(_binomial_topbinned(eta, K, n_max), N, "photoelectric", eta)


def onoff_response(eta: float, N: int, n_max: int) -> ResponseMatrix:
    """Binary click detector: outcome 1 whenever at least one photon is registered."""
    _check_eff(eta, N)
    return ResponseMatrix(_onoff(eta, n_max), N, "on_off", eta)


def custom_response(source, N: int = 1) -> ResponseMatrix:
    """Validated detector-level response from a CSV path or a matrix.

    Columns passing the 1e-9 completeness check are renormalized so the
    stored matrix is complete to rounding.
    """
    if isinstance(source, np.ndarray) or isinstance(source, (list, tuple)):
        d = np.array(source, dtype=float)
    else:
        d = _read_response_csv(source)
    _check_povm(d)
    sums = d.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > 1e-13):
        d = d / sums
    return ResponseMatrix(d, N, "custom", None)


def _read_response_csv(path) -> np.ndarray:
    head, rows = read_csv(path)
    if head[0] != "k":
        raise ParseError("response header must start with 'k'", 1)
    if not rows:
        raise ParseError("no outcome rows", 2)
    width = len(rows[0][1])
    d = np.zeros((len(rows), width - 1))
    for i, (line, fields) in enumerate(rows):
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, got {len(fields)}", line)
        try:
            k = int(fields[0])
            vals = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        if k != i:
            raise ParseError(f"outcome rows must run k=0..K in order, got k={k}", line)
        d[i] = vals
    return d


def coherent_outcome_probs(resp: ResponseMatrix, w: float, tol: float = 1e-10) -> np.ndarray:
    """Single-detector outcome probabilities for a coherent input of intensity ``w``.

    Averages the lifted response ``p`` over the Poisson photon statistics.
    """
    if w < 0:
        raise ValidationError("intensity must be >= 0")
    if w == 0:
        return np.array(resp.p[:, 0])
    if resp.family == "custom":
        tail = stats.poisson.sf(resp.n_max, w)
        if tail >= tol:
            raise TruncationError(
                f"Poisson tail {tail:.2e} beyond custom response n_max={resp.n_max}"
            )
    else:
        # parametric families extend for free; go well below tol
        n_need = int(w + 12.0 * np.sqrt(w)) + 40
        while stats.poisson.sf(n_need, w) > 1e-17:
            n_need += 10
        resp = resp.with_n_max(max(n_need, resp.n_max))
    pois = stats.poisson.pmf(np.arange(resp.n_max + 1), w)
    return resp.p @ pois
