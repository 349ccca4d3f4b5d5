"""Nonclassicality witnesses built on the normally ordered covariance matrix.

For a real vector ``f`` the operator ``:mu: = sum_k f_k :pi_k:`` has
normally ordered variance ``f^T M2 f``; classical light keeps it
nonnegative.  The three named criteria are

* sub-multinomial: the minimal eigenvalue of M2 (optimal ``f``),
* sub-binomial: ``f = (0, 1, ..., 1)``, reported as Q_bin,
* sub-Poisson: ``f = (0, 1, ..., K)``, reported via two Mandel parameters.

Uncertainties come from multinomial resampling of the counts table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .engine import CountsTable
from .errors import DegenerateError, ValidationError
from .jacobi import min_eig_sym
from .moments import (
    Data,
    MomentMatrix2,
    covariance_matrix,
    first_moments,
    higher_moment_matrix,
    raw_moments,
)

LABELS = ("multinomial-eigvec", "binomial", "poisson", "custom")
DEFAULT_Z = 3.0
# witnesses of exact classical data are zero up to round-off; below this they
# never count as a violation
VERDICT_ATOL = 1e-12


@dataclass(frozen=True)
class WitnessVector:
    f: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"unknown witness label {self.label!r}")
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float))

    @classmethod
    def binomial(cls, K: int) -> "WitnessVector":
        f = np.ones(K + 1)
        f[0] = 0.0
        return cls(f, "binomial")

    @classmethod
    def poisson(cls, K: int) -> "WitnessVector":
        return cls(np.arange(K + 1, dtype=float), "poisson")

    def to_dict(self) -> dict:
        return {"label": self.label, "components": self.f.tolist()}


@dataclass(frozen=True)
class CriterionResult:
    name: str
    value: float
    std_error: float = 0.0
    vector: WitnessVector | None = None
    z: float = DEFAULT_Z
    components: dict = field(default_factory=dict)
    flagged: bool = False
    atol: float = VERDICT_ATOL

    @property
    def verdict(self) -> str:
        if self.value + self.z * self.std_error < -self.atol:
            return "nonclassical"
        return "consistent-with-classical"

    @property
    def significance(self) -> float:
        if self.std_error > 0:
            return self.value / self.std_error
        if self.value == 0:
            return 0.0
        return math.copysign(math.inf, self.value)

    def with_error(self, std_error: float, flagged: bool = False) -> "CriterionResult":
        return replace(self, std_error=float(std_error), flagged=flagged)

    def to_dict(self) -> dict:
        sig = self.significance
        out = {
            "name": self.name,
            "value": self.value,
            "std_error": self.std_error,
            "significance": sig if math.isfinite(sig) else None,
            "verdict": self.verdict,
            "vector": self.vector.to_dict() if self.vector is not None else None,
        }
        if self.components:
            out["components"] = dict(self.components)
        if self.flagged:
            out["flagged"] = True
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _as_matrix(M2) -> np.ndarray:
    return M2.entries if isinstance(M2, MomentMatrix2) else np.asarray(M2, dtype=float)


def projected_criterion(M2, f) -> float:
    """f^T M2 f on whatever scale ``M2`` carries."""
    M = _as_matrix(M2)
    f = f.f if isinstance(f, WitnessVector) else np.asarray(f, dtype=float)
    if f.shape != (M.shape[0],):
        raise ValidationError(f"witness has length {f.size}, matrix is {M.shape[0]}x{M.shape[0]}")
    return float(f @ M @ f)


def q_multi(M2, z: float = DEFAULT_Z) -> CriterionResult:
    eig = min_eig_sym(_as_matrix(M2))
    return CriterionResult(
        "q_multi",
        eig.value,
        vector=WitnessVector(eig.vector, "multinomial-eigvec"),
        z=z,
        components={"degenerate": eig.degenerate},
    )


def _b_factorial(data: Data):
    """E[B], E[B(B-1)] for B = N - N_0; exact Fractions for counts tables."""
    N = data.config.N
    if isinstance(data, CountsTable):
        shots = data.shots
        s1 = sum((N - occ[0]) * c for occ, c in data.counts.items())
        s2 = sum((N - occ[0]) * (N - occ[0] - 1) * c for occ, c in data.counts.items())
        return Fraction(s1, shots), Fraction(s2, shots)
    first, second = raw_moments(data)
    mean = N - first[0]
    # E[B^2] = N^2 - 2N E[N_0] + E[N_0^2]
    return mean, N * N - 2 * N * first[0] + second[0, 0] - mean


def q_bin(data: Data, z: float = DEFAULT_Z) -> CriterionResult:
    """Q_bin = N Var(B) / (E[B] (N - E[B])) - 1 with B = N - N_0.

    Evaluated as (N E[B(B-1)] - (N-1) E[B]^2) / (E[B] (N - E[B])), which
    avoids cancelling against the trailing -1.
    """
    N = data.config.N
    if N < 2:
        raise ValidationError("Q_bin needs N >= 2")
    mean, fact2 = _b_factorial(data)
    if mean <= 0 or mean >= N:
        raise DegenerateError(f"Q_bin undefined: E[B] = {float(mean)} lies on the boundary {{0, N}}")
    value = (N * fact2 - (N - 1) * mean * mean) / (mean * (N - mean))
    return CriterionResult("q_bin", float(value), vector=WitnessVector.binomial(data.config.K), z=z)


def q_bin_projection(data: Data) -> float:
    """The same quantity from (N-1) f^T M2 f / (<:pi_0:>(1 - <:pi_0:>))."""
    N = data.config.N
    M2 = covariance_matrix(data)
    pi0 = first_moments(data)[0]
    if pi0 <= 0 or pi0 >= 1:
        raise DegenerateError("Q_bin undefined: <:pi_0:> is 0 or 1")
    f = WitnessVector.binomial(data.config.K)
    return (N - 1) * projected_criterion(M2, f) / (pi0 * (1 - pi0))


def q_pois(data: Data, z: float = DEFAULT_Z) -> CriterionResult:
    """Corrected sub-Poisson test.

    ``value`` is the combined ratio <:(dmu)^2:>/<:mu:> = (Q_Pois - Q'_Pois)/(N-1);
    both Mandel parameters are kept in ``components``.
    """
    N, K = data.config.N, data.config.K
    if N < 2:
        raise ValidationError("Q_Pois needs N >= 2")
    first, second = raw_moments(data)
    k = np.arange(K + 1, dtype=float)
    mean_A = float(k @ first)
    if mean_A <= 0:
        raise DegenerateError("Q_Pois undefined: E[A] = 0")
    var_A = float(k @ second @ k) - mean_A**2
    q = var_A / mean_A - 1.0
    p = first / N
    m1 = float(k @ p)
    m2 = float((k * k) @ p)
    q_prime = (m2 - m1 * m1) / m1 - 1.0
    combined = (q - q_prime) / (N - 1)
    return CriterionResult(
        "q_pois",
        combined,
        vector=WitnessVector.poisson(K),
        z=z,
        components={"Q_Pois": q, "Q_Pois_prime": q_prime, "combined": combined},
    )


def mu_statistics(data: Data, f) -> tuple[float, float]:
    """Normally ordered mean and variance of :mu: = sum_k f_k :pi_k: (raw scale)."""
    f = f.f if isinstance(f, WitnessVector) else np.asarray(f, dtype=float)
    mean = float(f @ first_moments(data))
    return mean, projected_criterion(covariance_matrix(data), f)


def full_matrix_test(data: Data, z: float = DEFAULT_Z) -> CriterionResult:
    """Minimal eigenvalue of the full matrix of normally ordered moments."""
    H = higher_moment_matrix(data)
    eig = min_eig_sym(H.entries)
    return CriterionResult(
        "full",
        eig.value,
        vector=WitnessVector(eig.vector, "custom"),
        z=z,
        components={"indices": [list(m) for m in H.indices], "degenerate": eig.degenerate},
    )


# --- bootstrap ---------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    std_error: float
    n_degenerate: int
    resamples: int

    @property
    def flagged(self) -> bool:
        return self.n_degenerate > 0.1 * self.resamples


def bootstrap(
    data: CountsTable,
    criterion: Callable[[CountsTable], float],
    resamples: int = 200,
    seed: int = 0,
) -> BootstrapResult:
    """Standard error of ``criterion`` under multinomial resampling of the counts.

    Resamples on which the criterion raises :class:`DegenerateError` are
    skipped and counted.
    """
    if not isinstance(data, CountsTable):
        raise ValidationError("bootstrap needs a CountsTable")
    if resamples < 100:
        raise ValidationError("at least 100 resamples are required")
    shots = data.shots
    if shots < 1:
        raise ValidationError("bootstrap needs at least one shot")
    keys = list(data.counts)
    p = np.array([data.counts[k] for k in keys], dtype=float) / shots
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    draws = rng.multinomial(shots, p, size=resamples)
    values = []
    bad = 0
    for row in draws:
        table = CountsTable(data.config, {k: int(c) for k, c in zip(keys, row) if c})
        try:
            values.append(criterion(table))
        except DegenerateError:
            bad += 1
    if len(values) < 2:
        return BootstrapResult(math.nan, bad, resamples)
    return BootstrapResult(float(np.std(values, ddof=1)), bad, resamples)


CRITERIA: dict[str, Callable[..., CriterionResult]] = {
    "multi": lambda d, z=DEFAULT_Z: q_multi(covariance_matrix(d), z),
    "bin": q_bin,
    "pois": q_pois,
    "full": full_matrix_test,
}


def evaluate(
    data: Data,
    names: Sequence[str] = ("multi", "bin", "pois"),
    resamples: int = 0,
    seed: int = 0,
    z: float = DEFAULT_Z,
) -> dict[str, CriterionResult | None]:
    """Evaluate named criteria, attaching bootstrap errors for counts data.

    Degenerate criteria map to ``None``.
    """
    out: dict[str, CriterionResult | None] = {}
    for i, name in enumerate(names):
        if name not in CRITERIA:
            raise ValidationError(f"unknown criterion {name!r}; choose from {sorted(CRITERIA)}")
        fn = CRITERIA[name]
        try:
            res = fn(data, z=z)
        except DegenerateError:
            out[name] = None
            continue
        if resamples and isinstance(data, CountsTable):
            bs = bootstrap(data, lambda t: fn(t, z=z).value, resamples, seed + i)
            res = res.with_error(bs.std_error, bs.flagged)
        out[name] = res
    return out


def rayleigh_quotient(M2, f) -> float:
    f = f.f if isinstance(f, WitnessVector) else np.asarray(f, dtype=float)
    return projected_criterion(M2, f) / float(f @ f)
