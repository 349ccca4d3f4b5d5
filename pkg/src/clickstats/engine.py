"""Click-counting statistics of a balanced N-way multiplexing layout.

Outcomes of the N identical detectors are recorded as occupation tuples
``(N_0, ..., N_K)`` (how many detectors reported each outcome).  Two exact
routes produce the distribution over these tuples:

* classical mixtures average a multinomial law with the coherent-state
  outcome probabilities of one detector;
* photon-number-diagonal inputs are propagated photon by photon: a balanced
  network sends every photon to one of the N outputs with probability 1/N,
  which is exact once all detectors are diagonal in photon number.

The sampler follows the second route shot by shot.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy import special

from .errors import SizeError, ValidationError
from .response import ResponseMatrix, coherent_outcome_probs, thinning_matrix
from .states import ClassicalMixture, PhotonDistribution, TMSVParams

DEFAULT_CAP = 10**6

Occupation = tuple[int, ...]


@dataclass(frozen=True)
class MultiplexConfig:
    N: int
    K: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("N must be >= 1")
        if self.K < 0:
            raise ValidationError("K must be >= 0")

    @property
    def n_occupations(self) -> int:
        return math.comb(self.N + self.K, self.K)

    def check_response(self, resp: ResponseMatrix) -> None:
        # one shared response per layout; anything else is rejected here
        if resp.K != self.K:
            raise ValidationError(f"response has K={resp.K}, layout expects K={self.K}")
        if resp.N != self.N:
            raise ValidationError(f"response was lifted for N={resp.N}, layout has N={self.N}")


def compositions(total: int, parts: int) -> Iterator[Occupation]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_occupations(config: MultiplexConfig) -> list[Occupation]:
    """All occupation tuples of the layout, in descending lexicographic order."""
    if config.n_occupations > config.cap:
        raise SizeError(
            f"C(N+K, K) = {config.n_occupations} occupation tuples exceed cap {config.cap}"
        )
    return list(compositions(config.N, config.K + 1))


def occupation_of_outcomes(outcomes: Sequence[int], K: int) -> Occupation:
    occ = [0] * (K + 1)
    for k in outcomes:
        if not 0 <= k <= K:
            raise ValidationError(f"outcome {k} outside [0, {K}]")
        occ[k] += 1
    return tuple(occ)


class _OccupationData:
    """Shared read-only view of a map from occupation tuples to weights."""

    config: MultiplexConfig

    def _items(self) -> Mapping[Occupation, float]:
        raise NotImplementedError

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Occupation tuples as an (S, K+1) int array and their weights."""
        items = self._items()
        if not items:
            return np.zeros((0, self.config.K + 1), dtype=np.int64), np.zeros(0)
        keys = list(items)
        occ = np.array(keys, dtype=np.int64)
        w = np.array([items[k] for k in keys], dtype=float)
        return occ, w

    def probabilities(self) -> dict[Occupation, float]:
        items = self._items()
        total = float(sum(items.values()))
        return {k: v / total for k, v in items.items()}


@dataclass(frozen=True)
class ClickDistribution(_OccupationData):
    config: MultiplexConfig
    probs: dict[Occupation, float]

    def _items(self):
        return self.probs

    def total(self) -> float:
        return float(sum(self.probs.values()))

    def get(self, occ: Sequence[int]) -> float:
        return self.probs.get(tuple(occ), 0.0)


@dataclass(frozen=True)
class CountsTable(_OccupationData):
    config: MultiplexConfig
    counts: dict[Occupation, int]

    def __post_init__(self):
        for occ, c in self.counts.items():
            if len(occ) != self.config.K + 1 or sum(occ) != self.config.N:
                raise ValidationError(f"{occ} is not an occupation tuple for N={self.config.N}, K={self.config.K}")
            if c < 0:
                raise ValidationError("counts must be nonnegative")

    def _items(self):
        return self.counts

    @property
    def shots(self) -> int:
        return int(sum(self.counts.values()))

    def get(self, occ: Sequence[int]) -> int:
        return self.counts.get(tuple(occ), 0)

    def merged(self, other: "CountsTable") -> "CountsTable":
        if other.config != self.config:
            raise ValidationError("cannot merge counts from different layouts")
        out = dict(self.counts)
        for k, v in other.counts.items():
            out[k] = out.get(k, 0) + v
        return CountsTable(self.config, _sorted(out))


def _sorted(d: Mapping[Occupation, float]) -> dict:
    return {k: d[k] for k in sorted(d, reverse=True)}


def multinomial_pmf(occ: np.ndarray, p: np.ndarray) -> np.ndarray:
    """N!/prod N_k! prod p_k^N_k for each row of ``occ``."""
    occ = np.asarray(occ)
    N = occ.sum(axis=1)
    log = special.gammaln(N + 1) - special.gammaln(occ + 1).sum(axis=1)
    log = log + special.xlogy(occ, p[None, :]).sum(axis=1)
    return np.exp(log)


def click_distribution_classical(
    mixture: ClassicalMixture, resp: ResponseMatrix, config: MultiplexConfig
) -> ClickDistribution:
    """Classical average of multinomial laws over a coherent-state mixture."""
    config.check_response(resp)
    occs = enumerate_occupations(config)
    occ = np.array(occs, dtype=np.int64)
    total = np.zeros(len(occs))
    for weight, w in mixture.components:
        if weight == 0:
            continue
        total += weight * multinomial_pmf(occ, coherent_outcome_probs(resp, w))
    return ClickDistribution(config, {o: float(v) for o, v in zip(occs, total) if v > 0})


def _routing_gather(n_max: int, share: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index/weight tables so that, for a vector v over photons r,
    H[m, r'] = v[r' + m] * P(m of r'+m photons go to this detector)."""
    B = thinning_matrix(n_max, share)
    m = np.arange(n_max + 1)[:, None]
    r = np.arange(n_max + 1)[None, :]
    src = m + r
    valid = src <= n_max
    src = np.where(valid, src, 0)
    weight = np.where(valid, B[src, np.broadcast_to(m, src.shape)], 0.0)
    return src, weight, valid


def click_distribution_fock_exact(
    dist: PhotonDistribution, resp: ResponseMatrix, config: MultiplexConfig
) -> ClickDistribution:
    """Exact click statistics of a photon-number-diagonal input.

    Dynamic programming over detectors: each state is a partial occupation
    tuple with a vector over photons not yet routed.  Detector i (of the
    remaining ``N - i``) receives each remaining photon with probability
    ``1/(N - i)`` and answers according to ``resp.detector``.  Only reachable
    tuples are kept, so large ``K`` costs nothing when high outcomes cannot
    occur.
    """
    config.check_response(resp)
    N, K = config.N, config.K
    n_max = dist.n_max
    D = resp.with_n_max(n_max).detector
    zero = (0,) * (K + 1)
    keys: list[Occupation] = [zero]
    V = np.array(dist.probs, dtype=float)[None, :]

    for i in range(N - 1):
        src, weight, _ = _routing_gather(n_max, 1.0 / (N - i))
        H = V[:, src] * weight[None, :, :]  # (S, m, r')
        G = np.einsum("km,smr->skr", D, H)  # outcome k, remaining photons r'
        live = G.any(axis=2)
        new: dict[Occupation, np.ndarray] = {}
        for s, k in zip(*np.nonzero(live)):
            occ = list(keys[s])
            occ[k] += 1
            occ = tuple(occ)
            if occ in new:
                new[occ] = new[occ] + G[s, k]
            else:
                new[occ] = G[s, k]
        if len(new) > config.cap:
            raise SizeError(f"{len(new)} intermediate states exceed cap {config.cap}")
        keys = list(new)
        V = np.array([new[k] for k in keys])

    final = V @ D.T  # last detector receives all remaining photons
    probs: dict[Occupation, float] = defaultdict(float)
    for s, k in zip(*np.nonzero(final)):
        occ = list(keys[s])
        occ[k] += 1
        probs[tuple(occ)] += float(final[s, k])
    return ClickDistribution(config, _sorted(probs))


def click_distribution(source, resp: ResponseMatrix, config: MultiplexConfig) -> ClickDistribution:
    if isinstance(source, ClassicalMixture):
        return click_distribution_classical(source, resp, config)
    return click_distribution_fock_exact(source, resp, config)


def total_variation(a: _OccupationData, b: _OccupationData) -> float:
    pa, pb = a.probabilities(), b.probabilities()
    return 0.5 * sum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in set(pa) | set(pb))


# --- sampling -------------------------------------------------------------


def _shard_sizes(shots: int, shards: int) -> list[int]:
    base, extra = divmod(shots, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _detect(photons: np.ndarray, resp: ResponseMatrix, N: int, rng: np.random.Generator) -> np.ndarray:
    """Route photons of each shot over N detectors and draw their outcomes.

    Returns an (shots, N) array of outcomes, one column per detector.
    """
    top = int(photons.max()) if photons.size else 0
    if top > resp.n_max:
        resp = resp.with_n_max(top)
    cdf = np.cumsum(resp.detector, axis=0)
    cdf[-1] = 1.0
    K = resp.K
    outcomes = np.zeros((photons.size, N), dtype=np.int64)
    remaining = photons.astype(np.int64)
    for i in range(N):
        if i < N - 1:
            m = rng.binomial(remaining, 1.0 / (N - i))
            remaining = remaining - m
        else:
            m = remaining
        u = rng.random(photons.size)
        k = np.zeros(photons.size, dtype=np.int64)
        for j in range(K):
            k += u >= cdf[j, m]
        outcomes[:, i] = k
    return outcomes


def _tabulate(outcomes: np.ndarray, K: int) -> dict[Occupation, int]:
    """Count occupation tuples from an (shots, N) array of detector outcomes."""
    if outcomes.shape[0] == 0:
        return {}
    N = outcomes.shape[1]
    if N * math.log2(K + 1) < 62:
        ordered = np.sort(outcomes, axis=1)
        code = np.zeros(outcomes.shape[0], dtype=np.int64)
        for i in range(N):
            code = code * (K + 1) + ordered[:, i]
        uniq, idx, cnt = np.unique(code, return_index=True, return_counts=True)
        rows = ordered[idx]
    else:
        rows, cnt = np.unique(np.sort(outcomes, axis=1), axis=0, return_counts=True)
    return {occupation_of_outcomes(r.tolist(), K): int(c) for r, c in zip(rows, cnt)}


def _draw_photons(source, size: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(source, ClassicalMixture):
        comp = rng.choice(len(source.components), size=size, p=source.weights)
        return rng.poisson(source.intensities[comp])
    probs = np.asarray(source.probs)
    return rng.choice(probs.size, size=size, p=probs / probs.sum())


def _run_shards(fn, shots: int, seed: int, shards: int, workers: int):
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    if shards < 1:
        raise ValidationError("shards must be >= 1")
    children = np.random.SeedSequence(seed).spawn(shards)
    jobs = [(size, np.random.Generator(np.random.PCG64(ss))) for size, ss in zip(_shard_sizes(shots, shards), children)]
    if workers > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(*job) for job in jobs]


def sample_clicks(
    source: PhotonDistribution | ClassicalMixture,
    resp: ResponseMatrix,
    config: MultiplexConfig,
    shots: int,
    seed: int,
    shards: int = 1,
    workers: int = 1,
) -> CountsTable:
    """Monte Carlo click counts; bit-identical for fixed ``(seed, shards)``.

    Generator: PCG64 streams spawned per shard from ``SeedSequence(seed)``.
    """
    config.check_response(resp)

    def one(size, rng):
        photons = _draw_photons(source, size, rng)
        return _tabulate(_detect(photons, resp, config.N, rng), config.K)

    merged: dict[Occupation, int] = defaultdict(int)
    for part in _run_shards(one, shots, seed, shards, workers):
        for k, v in part.items():
            merged[k] += v
    return CountsTable(config, _sorted(merged))


@dataclass(frozen=True)
class HeraldedCounts:
    """Signal click counts split by herald outcome ``l``."""

    config: MultiplexConfig
    tables: dict[int, CountsTable] = field(default_factory=dict)

    @property
    def herald_counts(self) -> dict[int, int]:
        return {l: t.shots for l, t in sorted(self.tables.items())}

    @property
    def shots(self) -> int:
        return sum(self.herald_counts.values())

    def eta_gen(self, l: int) -> float:
        """Fraction of all shots heralded with outcome ``l``."""
        return self.herald_counts.get(l, 0) / self.shots


def sample_heralded(
    params: TMSVParams,
    resp: ResponseMatrix,
    config: MultiplexConfig,
    shots: int,
    seed: int,
    shards: int = 1,
    workers: int = 1,
) -> HeraldedCounts:
    """Simulate pair emission, heralding, and multiplexed signal detection.

    Pairs follow P(n) = (1 - q_sq) q_sq^n; the herald registers each idler
    photon with probability ``herald_eff`` (photon-number resolving).
    """
    config.check_response(resp)
    s = params.q_sq

    def one(size, rng):
        if s == 0:
            n = np.zeros(size, dtype=np.int64)
        else:
            n = rng.geometric(1.0 - s, size=size) - 1
        herald = rng.binomial(n, params.herald_eff)
        outcomes = _detect(n, resp, config.N, rng)
        return {int(l): _tabulate(outcomes[herald == l], config.K) for l in np.unique(herald)}

    merged: dict[int, dict[Occupation, int]] = defaultdict(lambda: defaultdict(int))
    for part in _run_shards(one, shots, seed, shards, workers):
        for l, table in part.items():
            for k, v in table.items():
                merged[l][k] += v
    tables = {l: CountsTable(config, _sorted(t)) for l, t in sorted(merged.items())}
    return HeraldedCounts(config, tables)


def iter_outcome_assignments(occ: Occupation) -> Iterable[tuple[int, ...]]:
    """Distinct ordered outcome vectors (k_1..k_N) with the given occupation."""
    base = [k for k, n in enumerate(occ) for _ in range(n)]
    return sorted(set(permutations(base)))
