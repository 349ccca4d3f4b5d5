"""Check bootstrap standard errors against the spread over independent seeds.

Runs the same coherent-light simulation under many seeds, records each
criterion and its bootstrap error, and prints the ratio of the mean bootstrap
error to the across-seed standard deviation (ideally close to 1).

    python3 scripts/bootstrap_calibration.py --seeds 50 --shots 1000000
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from _common import config_from_args, parser_for, write_rows

from clickstats import (
    ClassicalMixture,
    MultiplexConfig,
    evaluate,
    photoelectric_response,
    sample_clicks,
)


@dataclass(frozen=True)
class CalibrationConfig:
    w: float = 1.0
    eta: float = 0.8
    N: int = 2
    K: int = 7
    shots: int = 10**6
    seeds: int = 50
    resamples: int = 200
    first_seed: int = 1000
    out: str | None = None


def run(cfg: CalibrationConfig) -> tuple[list[dict], dict]:
    mux = MultiplexConfig(cfg.N, cfg.K)
    resp = photoelectric_response(cfg.eta, cfg.N, cfg.K, 60)
    src = ClassicalMixture.coherent(cfg.w)
    rows = []
    for seed in range(cfg.first_seed, cfg.first_seed + cfg.seeds):
        table = sample_clicks(src, resp, mux, cfg.shots, seed=seed)
        row = {"seed": seed}
        for name, res in evaluate(table, resamples=cfg.resamples, seed=seed).items():
            row[name] = None if res is None else res.value
            row[f"{name}_se"] = None if res is None else res.std_error
        rows.append(row)
    summary = {}
    for name in ("multi", "bin", "pois"):
        vals = np.array([r[name] for r in rows if r[name] is not None], dtype=float)
        ses = np.array([r[f"{name}_se"] for r in rows if r[f"{name}_se"] is not None], dtype=float)
        if vals.size > 1 and ses.size:
            summary[name] = float(ses.mean() / vals.std(ddof=1))
    return rows, summary


def main(argv=None) -> None:
    args = parser_for(CalibrationConfig, __doc__.splitlines()[0]).parse_args(argv)
    cfg = config_from_args(CalibrationConfig, args)
    rows, summary = run(cfg)
    write_rows(rows, cfg.out, cfg)
    for name, ratio in summary.items():
        print(f"{name}: bootstrap SE / seed spread = {ratio:.3f}")


if __name__ == "__main__":
    main()
