"""Closed-form statistics of a heralded two-mode squeezed-vacuum source.

Model: pairs with P(n) = (1 - s) s^n (``s = q_sq``), a photon-number-resolving
herald of efficiency ``herald_eff``, and the signal split over ``N``
photoelectric detectors of efficiency ``det_eff`` without a top bin.  All
quantities follow from the joint generating function

    G(z, X) = (1 - s) / (1 - s * z' * x'),
    z' = 1 - herald_eff + herald_eff z,    x' = 1 - det_eff + det_eff X / N,

with ``X`` the sum of the signal-detector arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ValidationError
from .states import TMSVParams


@dataclass(frozen=True)
class OracleParams:
    q_sq: float
    herald_eff: float = 1.0
    det_eff: float = 1.0
    N: int = 2

    def __post_init__(self):
        if not 0 <= self.q_sq < 1:
            raise ValidationError("q_sq must lie in [0, 1)")
        if not 0 <= self.herald_eff <= 1 or not 0 <= self.det_eff <= 1:
            raise ValidationError("efficiencies must lie in [0, 1]")
        if self.N < 1:
            raise ValidationError("N must be >= 1")

    @property
    def lambda_tilde(self):
        return (1 - self.herald_eff) * self.q_sq

    @property
    def tmsv(self) -> TMSVParams:
        return TMSVParams(self.q_sq, self.herald_eff)


def _primed(params: OracleParams, z, x_norm):
    zp = 1 - params.herald_eff + params.herald_eff * z
    xp = 1 - params.det_eff + params.det_eff * x_norm / params.N
    return zp, xp


def generating_function(params: OracleParams, z, x_norm):
    if not 0 <= z <= 1 or not 0 <= x_norm <= params.N:
        raise DomainError("need z in [0, 1] and x_norm in [0, N]")
    s = params.q_sq
    zp, xp = _primed(params, z, x_norm)
    denom = 1 - s * zp * xp
    if denom <= 0:
        raise DomainError("generating function denominator is not positive")
    return (1 - s) / denom


def gf_derivative(params: OracleParams, k: int, l: int, z=1, x_norm=None):
    """k-th derivative in x_norm and l-th in z of the generating function.

    Evaluated as

        (1-s) k! l! (det_eff/N)^k herald_eff^l
          * sum_{j=0}^{min(k,l)} (k+l-j)! / (j! (k-j)! (l-j)!)
                * s^(k+l-j) z'^(k-j) x'^(l-j) / (1 - w)^(k+l+1-j)

    with w = s x' z'.  Arithmetic is generic: Fraction inputs stay exact.
    """
    if k < 0 or l < 0:
        raise ValidationError("derivative orders must be >= 0")
    if x_norm is None:
        x_norm = params.N
    gamma = generating_function(params, z, x_norm)
    if k == 0 and l == 0:
        return gamma
    s = params.q_sq
    if s == 0:
        return 0 * gamma
    zp, xp = _primed(params, z, x_norm)
    one_minus = 1 - s * zp * xp
    a = params.det_eff / params.N
    b = params.herald_eff
    total = 0
    for j in range(min(k, l) + 1):
        # ((1-w)/w)^j folded into the prefactor, so w = 0 needs no special case
        coeff = math.factorial(k + l - j) // (math.factorial(j) * math.factorial(k - j) * math.factorial(l - j))
        total += coeff * s ** (k + l - j) * zp ** (k - j) * xp ** (l - j) * one_minus ** (j - k - l - 1)
    return (1 - s) * math.factorial(l) * math.factorial(k) * a**k * b**l * total


def herald_marginal(params: OracleParams, l: int):
    if l < 0:
        raise ValidationError("herald outcome must be >= 0")
    s, eta = params.q_sq, params.herald_eff
    denom = 1 - s * (1 - eta)
    return (1 - s) / denom * (eta * s / denom) ** l


def detector_marginal(params: OracleParams, k: int):
    """Outcome statistics of one signal detector (photoelectric, no top bin)."""
    if k < 0:
        raise ValidationError("outcome must be >= 0")
    s, y = params.q_sq, params.det_eff / params.N
    denom = 1 - s * (1 - y)
    return (1 - s) / denom * (y * s / denom) ** k


def heralded_mu_theory(params: OracleParams, l: int) -> tuple[float, float]:
    """Normally ordered mean and variance of :mu: with f_k = k for herald outcome l."""
    if l < 0:
        raise ValidationError("herald outcome must be >= 0")
    lam = params.lambda_tilde
    y = params.det_eff / params.N
    mean = y * (lam + l) / (1 - lam)
    var = y * y * ((lam + l) ** 2 - l * (l + 1)) / (1 - lam) ** 2
    return mean, var


def eta_gen_theory(params: OracleParams, l: int):
    """Expected fraction of shots heralded with outcome l."""
    return herald_marginal(params, l)


def oracle_table(params: OracleParams, L: int) -> list[dict]:
    rows = []
    for l in range(L + 1):
        mean, var = heralded_mu_theory(params, l)
        rows.append(
            {
                "l": l,
                "herald_prob": herald_marginal(params, l),
                "eta_gen": eta_gen_theory(params, l),
                "mu_mean": mean,
                "mu_var": var,
            }
        )
    return rows
