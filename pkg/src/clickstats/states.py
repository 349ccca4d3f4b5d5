"""Truncated photon-number distributions for the light sources we simulate.

Every builder returns a :class:`PhotonDistribution` whose discarded tail is
bounded by ``tail_mass``.  If ``n_max`` is not given the truncation is
extended until the tail drops below ``tol`` (default 1e-10); a pinned
``n_max`` that cannot meet ``tol`` raises :class:`TruncationError`.

Only the intensity ``w = |alpha|^2`` of a coherent component is kept, since all
detector models here are diagonal in photon number.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import special, stats

from ._io import read_csv_rows
from .errors import ParseError, TruncationError, ValidationError

DEFAULT_TOL = 1e-10
MAX_AUTO_NMAX = 200_000


@dataclass(frozen=True)
class PhotonDistribution:
    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("probs must be a non-empty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("probabilities must be finite and >= 0")
        total = p.sum()
        if total > 1 + 1e-12 or total < 1 - self.tail_mass - 1e-12:
            raise ValidationError(
                f"mass {total!r} outside [1 - tail_mass, 1] with tail_mass={self.tail_mass}"
            )
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        n = np.arange(self.probs.size)
        return float(n @ self.probs / self.probs.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "prob"])
            for n, p in enumerate(self.probs):
                w.writerow([n, repr(float(p))])

    @classmethod
    def from_csv(cls, path, tail_mass: float | None = None) -> "PhotonDistribution":
        rows = read_csv_rows(path, ["n", "prob"])
        probs = np.zeros(len(rows))
        for line, (n, p) in rows:
            try:
                idx, val = int(n), float(p)
            except ValueError as exc:
                raise ParseError(str(exc), line) from None
            if not 0 <= idx < len(rows):
                raise ParseError(f"photon number {idx} out of range", line)
            probs[idx] = val
        if tail_mass is None:
            tail_mass = max(0.0, 1.0 - float(probs.sum()))
        return cls(probs, tail_mass)


@dataclass(frozen=True)
class ClassicalMixture:
    """Finite convex combination of coherent states, stored as (weight, intensity)."""

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        comps = tuple((float(wt), float(w)) for wt, w in self.components)
        if not comps:
            raise ValidationError("mixture needs at least one component")
        if any(wt < 0 for wt, _ in comps):
            raise ValidationError("mixture weights must be >= 0")
        if any(w < 0 for _, w in comps):
            raise ValidationError("intensities must be >= 0")
        if abs(sum(wt for wt, _ in comps) - 1.0) > 1e-12:
            raise ValidationError("mixture weights must sum to 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def coherent(cls, w: float) -> "ClassicalMixture":
        return cls(((1.0, w),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def intensities(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    def photon_distribution(self, n_max: int | None = None, tol: float = DEFAULT_TOL) -> PhotonDistribution:
        """Photon statistics of the mixture (a weighted sum of Poisson laws)."""
        if n_max is None:
            n_max = max(coherent_distribution(w, None, tol).n_max for _, w in self.components)
        probs = np.zeros(n_max + 1)
        tail = 0.0
        for wt, w in self.components:
            d = coherent_distribution(w, n_max, tol)
            probs += wt * d.probs
            tail += wt * d.tail_mass
        return PhotonDistribution(probs, tail)


@dataclass(frozen=True)
class TMSVParams:
    """Two-mode squeezed vacuum with an imperfect photon-number-resolving herald."""

    q_sq: float
    herald_eff: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.q_sq < 1.0:
            raise ValidationError("q_sq must lie in [0, 1)")
        if not 0.0 <= self.herald_eff <= 1.0:
            raise ValidationError("herald_eff must lie in [0, 1]")

    @property
    def lambda_tilde(self) -> float:
        return (1.0 - self.herald_eff) * self.q_sq


def _smallest_n(sf: Callable[[int], float], tol: float) -> int:
    """Smallest n with sf(n) < tol, for a nonincreasing tail function."""
    hi = 0
    while sf(hi) >= tol:
        hi = 2 * hi + 1
        if hi > MAX_AUTO_NMAX:
            raise TruncationError(f"tail mass stays above {tol} beyond n_max={MAX_AUTO_NMAX}")
    lo = hi // 2
    while lo < hi:
        mid = (lo + hi) // 2
        if sf(mid) < tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def _resolve_nmax(n_max: int | None, sf: Callable[[int], float], tol: float) -> tuple[int, float]:
    if n_max is None:
        # half the budget, so summation rounding cannot push the kept mass below 1 - tol
        n_max = _smallest_n(sf, 0.5 * tol)
    elif n_max < 0:
        raise ValidationError("n_max must be >= 0")
    tail = float(sf(n_max))
    if tail >= tol and tail > 0:
        raise TruncationError(f"tail mass {tail:.3e} beyond n_max={n_max} exceeds {tol:.1e}")
    return n_max, max(tail, 0.0)


def fock_distribution(l: int, n_max: int | None = None) -> PhotonDistribution:
    if l < 0:
        raise ValidationError("photon number must be >= 0")
    if n_max is None:
        n_max = l
    if l > n_max:
        raise TruncationError(f"Fock state |{l}> does not fit below n_max={n_max}")
    probs = np.zeros(n_max + 1)
    probs[l] = 1.0
    return PhotonDistribution(probs, 0.0)


def coherent_distribution(w: float, n_max: int | None = None, tol: float = DEFAULT_TOL) -> PhotonDistribution:
    """Poisson photon statistics of a coherent state with intensity ``w``."""
    if w < 0:
        raise ValidationError("intensity must be >= 0")
    if w == 0:
        return fock_distribution(0, 0 if n_max is None else n_max)
    n_max, tail = _resolve_nmax(n_max, lambda n: stats.poisson.sf(n, w), tol)
    probs = stats.poisson.pmf(np.arange(n_max + 1), w)
    return PhotonDistribution(probs, tail)


def thermal_distribution(mean: float, n_max: int | None = None, tol: float = DEFAULT_TOL) -> PhotonDistribution:
    """Geometric (Bose-Einstein) law with mean photon number ``mean``."""
    if mean < 0:
        raise ValidationError("mean photon number must be >= 0")
    if mean == 0:
        return fock_distribution(0, 0 if n_max is None else n_max)
    ratio = mean / (1.0 + mean)
    n_max, tail = _resolve_nmax(n_max, lambda n: ratio ** (n + 1), tol)
    n = np.arange(n_max + 1)
    probs = ratio**n / (1.0 + mean)
    return PhotonDistribution(probs, tail)


def _heralded_tail(lam: float, l: int) -> Callable[[int], float]:
    # P(k > n) for k - l ~ NegBinom(l + 1, 1 - lam)
    return lambda n: float(stats.nbinom.sf(n - l, l + 1, 1.0 - lam)) if n >= l else 1.0


def heralded_tmsv_distribution(
    params: TMSVParams, l: int, n_max: int | None = None, tol: float = DEFAULT_TOL
) -> PhotonDistribution:
    """Signal photon statistics conditioned on ``l`` herald counts.

    probs[k] = C(k, l) (1 - lam)^(l + 1) lam^(k - l) for k >= l, with
    ``lam = params.lambda_tilde``.
    """
    if l < 0:
        raise ValidationError("herald outcome must be >= 0")
    lam = params.lambda_tilde
    if lam == 0.0:
        return fock_distribution(l, n_max)
    n_max, tail = _resolve_nmax(n_max, _heralded_tail(lam, l), tol)
    if l > n_max:
        raise TruncationError(f"herald outcome {l} exceeds n_max={n_max}")
    k = np.arange(l, n_max + 1)
    log_p = (
        special.gammaln(k + 1)
        - special.gammaln(l + 1)
        - special.gammaln(k - l + 1)
        + (l + 1) * math.log1p(-lam)
        + (k - l) * math.log(lam)
    )
    probs = np.zeros(n_max + 1)
    probs[l:] = np.exp(log_p)
    return PhotonDistribution(probs, tail)


def herald_probability(params: TMSVParams, l: int) -> float:
    """Probability that the herald registers ``l`` photons."""
    if l < 0:
        raise ValidationError("herald outcome must be >= 0")
    s, eta = params.q_sq, params.herald_eff
    denom = 1.0 - s * (1.0 - eta)
    return (1.0 - s) / denom * (eta * s / denom) ** l


def as_distribution(obj: PhotonDistribution | Iterable[float]) -> PhotonDistribution:
    if isinstance(obj, PhotonDistribution):
        return obj
    return PhotonDistribution(np.asarray(list(obj), dtype=float))
