"""Exact criteria for Fock states under increasing loss.

Evaluates q_multi, q_bin and q_pois on the exact click distribution of |l>
for every l and efficiency in the grid; no sampling involved.

    python3 scripts/fock_ladder.py --l 1 2 3 4 5 --eta 1.0 0.8 0.5 0.2
"""

from __future__ import annotations

from dataclasses import dataclass

from _common import config_from_args, parser_for, write_rows

from clickstats import (
    MultiplexConfig,
    WitnessVector,
    click_distribution_fock_exact,
    evaluate,
    fock_distribution,
    mu_statistics,
    photoelectric_response,
)


@dataclass(frozen=True)
class LadderConfig:
    l: tuple[int, ...] = (1, 2, 3, 4, 5)
    eta: tuple[float, ...] = (1.0, 0.8, 0.6, 0.4, 0.2)
    N: int = 2
    K: int = 7
    out: str | None = None


def run(cfg: LadderConfig) -> list[dict]:
    mux = MultiplexConfig(cfg.N, cfg.K)
    f = WitnessVector.poisson(cfg.K)
    rows = []
    for l in cfg.l:
        src = fock_distribution(l)
        for eta in cfg.eta:
            d = click_distribution_fock_exact(src, photoelectric_response(eta, cfg.N, cfg.K, src.n_max), mux)
            mean, var = mu_statistics(d, f)
            row = {"l": l, "eta": eta, "mu_mean": mean, "mu_var": var}
            for name, res in evaluate(d, ("multi", "bin", "pois", "full")).items():
                row[name] = None if res is None else res.value
            rows.append(row)
    return rows


def main(argv=None) -> None:
    args = parser_for(LadderConfig, __doc__.splitlines()[0]).parse_args(argv)
    cfg = config_from_args(LadderConfig, args)
    write_rows(run(cfg), cfg.out, cfg)


if __name__ == "__main__":
    main()
