"""Normally ordered moments from click-counting data.

Everything is computed from aggregated occupation tuples.  Sampled factorial
moments E[prod_k (N_k)_{m_k}] equal (N)_{|m|} times the normally ordered
moment <:pi_0^{m_0} ... pi_K^{m_K}:>, which is what makes the moment matrices
directly accessible from data.

Counts tables are accumulated in exact integer arithmetic before the final
division, so large shot numbers lose nothing to cancellation.  Weights
given as :class:`fractions.Fraction` stay exact in :func:`factorial_moment`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .engine import ClickDistribution, CountsTable, compositions
from .errors import ValidationError

Data = Union[ClickDistribution, CountsTable]
MultiIndex = tuple[int, ...]

SCALES = ("raw", "scaled")


def _check_order(data: Data, m: Sequence[int]) -> MultiIndex:
    m = tuple(int(x) for x in m)
    K, N = data.config.K, data.config.N
    if len(m) != K + 1:
        raise ValidationError(f"multi-index needs {K + 1} entries, got {len(m)}")
    if any(x < 0 for x in m):
        raise ValidationError("multi-index entries must be >= 0")
    if sum(m) > N:
        raise ValidationError(f"moment order {sum(m)} exceeds the number of detectors N={N}")
    return m


def _items(data: Data) -> dict:
    items = data._items()
    if not items or sum(items.values()) == 0:
        raise ValidationError("no data: empty counts table or distribution")
    return items


def factorial_moment(data: Data, m: Sequence[int]):
    """Mean of prod_k (N_k)_{m_k} under the empirical or exact distribution."""
    m = _check_order(data, m)
    items = _items(data)
    total = sum(items.values())
    acc = sum(w * math.prod(math.perm(n, mk) for n, mk in zip(occ, m)) for occ, w in items.items())
    return acc / total


def normal_moment(data: Data, m: Sequence[int]):
    m = _check_order(data, m)
    return factorial_moment(data, m) / math.perm(data.config.N, sum(m))


def factorial_moment_table(data: Data, order: int | None = None) -> dict[MultiIndex, float]:
    """All factorial moments with |m| <= order (default N)."""
    N, K = data.config.N, data.config.K
    order = N if order is None else order
    return {m: factorial_moment(data, m) for d in range(order + 1) for m in compositions(d, K + 1)}


# --- second order ----------------------------------------------------------


def raw_moments(data: Data) -> tuple[np.ndarray, np.ndarray]:
    """E[N_k] and E[N_k N_k'] with careful accumulation."""
    items = _items(data)
    occ = np.array(list(items), dtype=np.int64)
    vals = list(items.values())
    if isinstance(data, CountsTable):
        c = np.array(vals, dtype=np.int64)
        shots = int(c.sum())
        # exact integer sums; shots * N^2 stays far below 2^63 in practice
        first = (c @ occ).astype(float) / shots
        second = (occ.T @ (occ * c[:, None])).astype(float) / shots
        return first, second
    w = np.array([float(v) for v in vals])
    w = w / math.fsum(w)
    return w @ occ, occ.T @ (occ * w[:, None])


def covariance_from_moments(first: np.ndarray, second: np.ndarray, N: int, scaled: bool) -> np.ndarray:
    """Scaled matrix N cov - E[N_k](N delta - E[N_k']); divided by N^2(N-1) unless ``scaled``."""
    cov = second - np.outer(first, first)
    M = N * cov - first[:, None] * (N * np.eye(first.size) - first[None, :])
    M = 0.5 * (M + M.T)
    if not scaled:
        M = M / (N * N * (N - 1))
    return M


@dataclass(frozen=True)
class MomentMatrix2:
    """Normally ordered covariance matrix <:dpi_k dpi_k':> of the click outcomes."""

    entries: np.ndarray
    scale: str
    N: int

    @property
    def K(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def raw(self) -> np.ndarray:
        if self.scale == "raw":
            return self.entries
        return self.entries / (self.N * self.N * (self.N - 1))

    def to_json(self) -> str:
        return json.dumps({"scale": self.scale, "K": self.K, "N": self.N, "entries": self.entries.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MomentMatrix2":
        obj = json.loads(text)
        K = int(obj["K"])
        entries = np.array(obj["entries"], dtype=float).reshape(K + 1, K + 1)
        return cls(entries, obj["scale"], int(obj.get("N", 2)))


def covariance_matrix(data: Data, scale: str = "raw") -> MomentMatrix2:
    if scale not in SCALES:
        raise ValidationError(f"scale must be one of {SCALES}")
    N = data.config.N
    if N < 2:
        raise ValidationError("second-order moments need N >= 2 detectors")
    first, second = raw_moments(data)
    return MomentMatrix2(covariance_from_moments(first, second, N, scale == "scaled"), scale, N)


def first_moments(data: Data) -> np.ndarray:
    """<:pi_k:> = E[N_k] / N."""
    return raw_moments(data)[0] / data.config.N


# --- higher order ----------------------------------------------------------


@dataclass(frozen=True)
class HigherMomentMatrix:
    indices: tuple[MultiIndex, ...]
    entries: np.ndarray


def moment_indices(N: int, K: int) -> list[MultiIndex]:
    """Multi-indices with |m| <= floor(N/2), graded by degree."""
    return [m for d in range(N // 2 + 1) for m in compositions(d, K + 1)]


def _falling_table(N: int) -> np.ndarray:
    return np.array([[math.perm(n, m) for m in range(N + 1)] for n in range(N + 1)], dtype=float)


def normal_moments_batch(data: Data, ms: Iterable[MultiIndex]) -> dict[MultiIndex, float]:
    """Vectorized normal_moment for many multi-indices at once."""
    items = _items(data)
    occ = np.array(list(items), dtype=np.int64)
    w = np.array([float(v) for v in items.values()])
    w = w / w.sum()
    N = data.config.N
    ff = _falling_table(N)
    out = {}
    for m in ms:
        m = _check_order(data, m)
        prod = np.ones(occ.shape[0])
        for k, mk in enumerate(m):
            if mk:
                prod = prod * ff[occ[:, k], mk]
        out[m] = float(w @ prod) / math.perm(N, sum(m))
    return out


def higher_moment_matrix(data: Data) -> HigherMomentMatrix:
    N, K = data.config.N, data.config.K
    if N < 2:
        raise ValidationError("moment matrix needs N >= 2 detectors")
    idx = moment_indices(N, K)
    sums = {tuple(a + b for a, b in zip(mi, mj)) for mi in idx for mj in idx}
    vals = normal_moments_batch(data, sums)
    M = np.array([[vals[tuple(a + b for a, b in zip(mi, mj))] for mj in idx] for mi in idx])
    return HigherMomentMatrix(tuple(idx), M)
