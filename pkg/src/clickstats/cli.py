"""Command-line workbench: simulate, analyze, oracle, calibrate, report.

Exit codes: 0 success, 2 invalid input, 3 every requested criterion was
degenerate, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .criteria import CRITERIA, evaluate
from .engine import (
    ClickDistribution,
    CountsTable,
    MultiplexConfig,
    click_distribution,
    sample_clicks,
    sample_heralded,
)
from .errors import ClickStatsError, ValidationError
from .ingest import (
    BinningSpec,
    coincidences_from_readings,
    fit_quadratic_calibration,
    has_herald_column,
    is_distribution_file,
    load_coincidences,
    load_distribution,
    load_heralded,
    read_calibration_points,
    read_readings,
    save_counts,
    save_distribution,
    save_heralded,
)
from .oracle import OracleParams, oracle_table
from .response import custom_response, onoff_response, photoelectric_response
from .states import (
    ClassicalMixture,
    TMSVParams,
    fock_distribution,
    heralded_tmsv_distribution,
    thermal_distribution,
)

EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE, EXIT_IO = 0, 2, 3, 4

STATE_KINDS = ("fock", "coherent", "thermal", "mixture", "heralded", "tmsv")
DETECTOR_KINDS = ("photoelectric", "onoff", "custom")


# --- configuration -----------------------------------------------------------


@dataclass
class RunConfig:
    """Everything needed to reproduce a simulate or analyze run."""

    state: str = "coherent:w=1"
    detector: str = "photoelectric:eta=1"
    N: int = 2
    K: int | None = None
    shots: int | None = None
    seed: int = 0
    exact: bool = False
    criteria: list[str] = field(default_factory=lambda: ["multi", "bin", "pois"])
    bootstrap: int = 0
    shards: int = 1
    out: str | None = None

    def validate(self) -> "RunConfig":
        def need_int(name, lo, optional=False):
            v = getattr(self, name)
            if v is None and optional:
                return
            if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                raise ValidationError(f"{name}: must be an integer >= {lo}, got {v!r}")

        need_int("N", 1)
        need_int("K", 0, optional=True)
        need_int("shots", 1, optional=True)
        need_int("seed", 0)
        need_int("bootstrap", 0)
        need_int("shards", 1)
        if not isinstance(self.exact, bool):
            raise ValidationError(f"exact: must be true or false, got {self.exact!r}")
        if isinstance(self.criteria, str):
            self.criteria = [c for c in self.criteria.split(",") if c]
        for i, name in enumerate(self.criteria):
            if name not in CRITERIA:
                raise ValidationError(f"criteria[{i}]: unknown criterion {name!r}; choose from {sorted(CRITERIA)}")
        if 0 < self.bootstrap < 100:
            raise ValidationError(f"bootstrap: need 0 or at least 100 resamples, got {self.bootstrap}")
        parse_spec(self.state, "state", STATE_KINDS)
        parse_spec(self.detector, "detector", DETECTOR_KINDS)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return config_hash(self.to_dict())


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def parse_spec(text: str, path: str, kinds: tuple[str, ...]) -> tuple[str, dict[str, str]]:
    """``kind:key=value,key=value``; a bare value is stored under the key ``""``."""
    if not isinstance(text, str) or not text:
        raise ValidationError(f"{path}: expected 'kind:params', got {text!r}")
    kind, _, rest = text.partition(":")
    if kind not in kinds:
        raise ValidationError(f"{path}: unknown kind {kind!r}; choose from {list(kinds)}")
    params: dict[str, str] = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            key, value = "", key
        if key in params:
            raise ValidationError(f"{path}.{key or kind}: given twice")
        params[key.strip()] = value.strip()
    return kind, params


def _num(params: dict, key: str, path: str, cast=float, default=None):
    if key not in params:
        if default is None:
            raise ValidationError(f"{path}.{key}: required")
        return default
    try:
        return cast(params[key])
    except ValueError:
        raise ValidationError(f"{path}.{key}: cannot read {params[key]!r} as {cast.__name__}") from None


def _check_keys(params: dict, allowed: set, path: str) -> None:
    for key in params:
        if key not in allowed:
            raise ValidationError(f"{path}.{key or '<value>'}: unexpected parameter")


def build_source(spec: str):
    """PhotonDistribution, ClassicalMixture, or TMSVParams (herald simulation)."""
    kind, p = parse_spec(spec, "state", STATE_KINDS)
    path = f"state.{kind}"
    try:
        if kind == "fock":
            _check_keys(p, {"", "l"}, path)
            key = "l" if "l" in p else ""
            return fock_distribution(_num(p, key, path, int))
        if kind == "coherent":
            _check_keys(p, {"w"}, path)
            return ClassicalMixture.coherent(_num(p, "w", path))
        if kind == "thermal":
            _check_keys(p, {"mean"}, path)
            return thermal_distribution(_num(p, "mean", path))
        if kind == "mixture":
            _check_keys(p, {"weights", "w"}, path)
            if "weights" not in p or "w" not in p:
                raise ValidationError(f"{path}: needs weights=a/b/.. and w=x/y/..")
            weights = [float(x) for x in p["weights"].split("/")]
            ws = [float(x) for x in p["w"].split("/")]
            if len(weights) != len(ws):
                raise ValidationError(f"{path}: weights and w differ in length")
            return ClassicalMixture(tuple(zip(weights, ws)))
        if kind == "heralded":
            _check_keys(p, {"q_sq", "herald_eff", "l"}, path)
            params = TMSVParams(_num(p, "q_sq", path), _num(p, "herald_eff", path, default=1.0))
            return heralded_tmsv_distribution(params, _num(p, "l", path, int))
        _check_keys(p, {"q_sq", "herald_eff"}, path)
        return TMSVParams(_num(p, "q_sq", path), _num(p, "herald_eff", path, default=1.0))
    except ValidationError as exc:
        if str(exc).startswith("state"):
            raise
        raise ValidationError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _source_nmax(source) -> int:
    if isinstance(source, ClassicalMixture):
        return source.photon_distribution().n_max
    if isinstance(source, TMSVParams):
        s = source.q_sq
        return thermal_distribution(s / (1 - s)).n_max if s > 0 else 0
    return source.n_max


def build_response(spec: str, N: int, K: int | None, n_max: int):
    kind, p = parse_spec(spec, "detector", DETECTOR_KINDS)
    path = f"detector.{kind}"
    try:
        if kind == "photoelectric":
            _check_keys(p, {"eta"}, path)
            if K is None:
                raise ValidationError("K: required for photoelectric detectors")
            return photoelectric_response(_num(p, "eta", path, default=1.0), N, K, n_max)
        if kind == "onoff":
            _check_keys(p, {"eta"}, path)
            if K not in (None, 1):
                raise ValidationError(f"K: on/off detectors have K=1, got {K}")
            return onoff_response(_num(p, "eta", path, default=1.0), N, n_max)
        _check_keys(p, {"path"}, path)
        if "path" not in p:
            raise ValidationError(f"{path}.path: required")
        resp = custom_response(p["path"], N)
        if K is not None and resp.K != K:
            raise ValidationError(f"K: response file has K={resp.K}, got {K}")
        return resp
    except ValidationError as exc:
        if str(exc).startswith(("detector", "K:")):
            raise
        raise ValidationError(f"{path}: {exc}") from None


def _load_config_file(path: str) -> dict:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return obj


def _merge_config(args, names: list[str]) -> dict:
    """Flags, then overrides from ``--config``."""
    values = {n: getattr(args, n) for n in names}
    if getattr(args, "config", None):
        for key, value in _load_config_file(args.config).items():
            if key not in values:
                raise ValidationError(f"{args.config}:{key}: unknown field; allowed {names}")
            values[key] = value
    return values


def run_config_from_args(args) -> RunConfig:
    names = [f.name for f in fields(RunConfig)]
    values = _merge_config(args, names)
    return RunConfig(**values).validate()


# --- output helpers ----------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _dump_json(obj, path: str | None) -> None:
    text = json.dumps(_clean(obj), indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def distribution_checksum(dist: ClickDistribution) -> str:
    h = hashlib.sha256()
    for occ, p in sorted(dist.probs.items(), reverse=True):
        h.update(f"{','.join(map(str, occ))},{float(p)!r}\n".encode())
    return h.hexdigest()


def _file_sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# --- subcommands -------------------------------------------------------------


def cmd_simulate(config: RunConfig) -> int:
    if config.out is None:
        raise ValidationError("out: required for simulate")
    if config.shots is None and not config.exact:
        raise ValidationError("shots: required unless exact mode is requested")
    source = build_source(config.state)
    resp = build_response(config.detector, config.N, config.K, _source_nmax(source))
    layout = MultiplexConfig(config.N, resp.K)
    sidecar = {"version": __version__, "config": config.to_dict(), "config_hash": config.digest()}

    if isinstance(source, TMSVParams):
        if config.exact:
            raise ValidationError("exact: not available for tmsv; use heralded:q_sq=..,l=.. per herald outcome")
        data = sample_heralded(source, resp, layout, config.shots, config.seed, config.shards)
        save_heralded(data, config.out)
        sidecar["shots"] = data.shots
        sidecar["herald_counts"] = data.herald_counts
    else:
        if config.exact:
            exact = click_distribution(source, resp, layout)
            sidecar["exact_checksum"] = distribution_checksum(exact)
            if config.shots is None:
                save_distribution(exact, config.out)
        if config.shots is not None:
            table = sample_clicks(source, resp, layout, config.shots, config.seed, config.shards)
            save_counts(table, config.out)
            sidecar["shots"] = table.shots
    sidecar["output_sha256"] = _file_sha256(config.out)
    _dump_json(sidecar, config.out + ".json")
    return EXIT_OK


CRITERION_NAMES = {"multi": "q_multi", "bin": "q_bin", "pois": "q_pois", "full": "full"}

_NUM_OR_NULL = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "config_hash", "config", "criteria"],
    "properties": {
        "version": {"type": "string"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "config": {"type": "object", "required": ["N", "K", "criteria", "bootstrap", "seed"]},
        "eta_gen": {"type": "number", "minimum": 0, "maximum": 1},
        "criteria": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["criterion", "name", "value", "std_error", "significance", "verdict"],
                "properties": {
                    "criterion": {"enum": list(CRITERION_NAMES)},
                    "name": {"enum": list(CRITERION_NAMES.values())},
                    "value": _NUM_OR_NULL,
                    "std_error": _NUM_OR_NULL,
                    "significance": _NUM_OR_NULL,
                    "verdict": {"enum": ["nonclassical", "consistent-with-classical", None]},
                    "vector": {
                        "type": ["object", "null"],
                        "required": ["label", "components"],
                        "properties": {"label": {"type": "string"}, "components": {"type": "array", "items": {"type": "number"}}},
                    },
                },
            },
        },
    },
}


def analyze_data(data, criteria, bootstrap: int, seed: int) -> list[dict]:
    results = evaluate(data, criteria, resamples=bootstrap, seed=seed)
    out = []
    for key in criteria:
        res = results[key]
        if res is None:
            out.append({"criterion": key, "name": CRITERION_NAMES[key], "value": None, "std_error": None,
                        "significance": None, "verdict": None, "reason": "degenerate"})
        else:
            entry = {"criterion": key, **res.to_dict()}
            if bootstrap == 0 and isinstance(data, CountsTable):
                # no resampling was done: the error is unknown, not zero
                entry["std_error"] = entry["significance"] = None
            out.append(entry)
    return out


def cmd_analyze(args) -> int:
    values = _merge_config(args, ["input", "criteria", "bootstrap", "seed", "K", "herald", "out"])
    cfg = RunConfig(
        K=values["K"], seed=values["seed"], criteria=values["criteria"], bootstrap=values["bootstrap"], out=values["out"]
    ).validate()
    herald = values["herald"]
    path = values["input"]
    report: dict = {"version": __version__}
    l_used = None
    if is_distribution_file(path):
        data = load_distribution(path)
    elif has_herald_column(path):
        heralded = load_heralded(path, cfg.K)
        l_used = 1 if herald is None else herald
        if l_used not in heralded.tables:
            raise ValidationError(f"herald: no shots with herald outcome {l_used}")
        report["eta_gen"] = heralded.eta_gen(l_used)
        data = heralded.tables[l_used]
    else:
        data = load_coincidences(path, cfg.K)
    if herald is not None and l_used is None:
        raise ValidationError("herald: input has no herald column")
    analysis = {
        "input": path,
        "input_sha256": _file_sha256(path),
        "N": data.config.N,
        "K": data.config.K,
        "herald": l_used,
        "criteria": cfg.criteria,
        "bootstrap": cfg.bootstrap,
        "seed": cfg.seed,
    }
    if hasattr(data, "shots"):
        analysis["shots"] = data.shots
    report["config"] = analysis
    report["config_hash"] = config_hash(_clean(analysis))
    report["criteria"] = analyze_data(data, cfg.criteria, cfg.bootstrap, cfg.seed)
    # keep the documented key order: config, eta_gen?, criteria
    ordered = {"version": report["version"], "config_hash": report["config_hash"], "config": report["config"]}
    if "eta_gen" in report:
        ordered["eta_gen"] = report["eta_gen"]
    ordered["criteria"] = report["criteria"]
    _dump_json(ordered, cfg.out)
    if all(c["value"] is None for c in ordered["criteria"]):
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_oracle(args) -> int:
    values = _merge_config(args, ["state", "detector", "N", "L", "out", "csv"])
    kind, p = parse_spec(values["state"], "state", ("tmsv",))
    _check_keys(p, {"q_sq", "herald_eff"}, "state.tmsv")
    dkind, dp = parse_spec(values["detector"], "detector", ("photoelectric",))
    _check_keys(dp, {"eta"}, "detector.photoelectric")
    N, L = values["N"], values["L"]
    if not isinstance(L, int) or L < 0:
        raise ValidationError(f"L: must be an integer >= 0, got {L!r}")
    params = OracleParams(
        _num(p, "q_sq", "state.tmsv"),
        _num(p, "herald_eff", "state.tmsv", default=1.0),
        _num(dp, "eta", "detector.photoelectric", default=1.0),
        N,
    )
    rows = oracle_table(params, L)
    if values["csv"]:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        _write_text(buf.getvalue(), values["out"])
    else:
        _dump_json({"version": __version__, "params": asdict(params), "lambda_tilde": params.lambda_tilde,
                    "rows": rows}, values["out"])
    return EXIT_OK


def _write_text(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_calibrate(args) -> int:
    fit = fit_quadratic_calibration(read_calibration_points(args.points))
    out: dict = {"version": __version__, "fit": fit.to_dict()}
    if args.readings:
        if args.edges:
            try:
                edges = [float(x) for x in args.edges.split(",")]
            except ValueError:
                raise ValidationError(f"edges: cannot parse {args.edges!r}") from None
            spec = BinningSpec(tuple(edges))
        elif args.K is not None:
            spec = BinningSpec.from_calibration(fit, args.K)
        else:
            raise ValidationError("K: required to bin readings (or give --edges)")
        if args.coincidences is None:
            raise ValidationError("coincidences: output path required with --readings")
        table, dropped = coincidences_from_readings([read_readings(p) for p in args.readings], spec)
        save_counts(table, args.coincidences)
        out["binning"] = {"edges": [e for e in spec.edges if math.isfinite(e)], "K": spec.K,
                          "shots": table.shots, "dropped": dropped}
    _dump_json(out, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    """Flatten analyze reports into one plot-ready CSV table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["report", "eta_gen", "criterion", "value", "std_error", "significance", "verdict"])
    for path in args.reports:
        with open(path) as fh:
            try:
                rep = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(rep, dict) or "criteria" not in rep:
            raise ValidationError(f"{path}: not an analyze report")
        eta = rep.get("eta_gen")
        for c in rep["criteria"]:
            w.writerow([path, "" if eta is None else eta] +
                       ["" if c.get(k) is None else c[k] for k in ("name", "value", "std_error", "significance", "verdict")])
    _write_text(buf.getvalue(), args.out)
    return EXIT_OK


# --- entry point -------------------------------------------------------------


def _criteria_list(text: str) -> list[str]:
    return [c.strip() for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clickstats", description="Click-counting statistics workbench.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample click counts or compute the exact distribution")
    sim.add_argument("--state", default=RunConfig.state, help="fock:l | coherent:w=.. | thermal:mean=.. | "
                     "mixture:weights=a/b,w=x/y | heralded:q_sq=..,herald_eff=..,l=.. | tmsv:q_sq=..,herald_eff=..")
    sim.add_argument("--detector", default=RunConfig.detector, help="photoelectric:eta=.. | onoff:eta=.. | custom:path=..")
    sim.add_argument("-N", type=int, default=RunConfig.N)
    sim.add_argument("-K", type=int, default=None)
    sim.add_argument("--shots", type=int, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--shards", type=int, default=1)
    sim.add_argument("--exact", action="store_true")
    sim.add_argument("--criteria", type=_criteria_list, default=["multi", "bin", "pois"])
    sim.add_argument("--bootstrap", type=int, default=0)
    sim.add_argument("--out")
    sim.add_argument("--config", help="JSON file whose fields override the flags")

    ana = sub.add_parser("analyze", help="evaluate nonclassicality criteria on a counts file")
    ana.add_argument("input")
    ana.add_argument("--criteria", type=_criteria_list, default=["multi", "bin", "pois"])
    ana.add_argument("--bootstrap", type=int, default=0)
    ana.add_argument("--seed", type=int, default=0)
    ana.add_argument("-K", type=int, default=None, help="top outcome when the file lists per-detector outcomes")
    ana.add_argument("--herald", type=int, default=None, help="herald outcome to condition on (default 1)")
    ana.add_argument("--out")
    ana.add_argument("--config")

    ora = sub.add_parser("oracle", help="closed-form heralded-source table")
    ora.add_argument("--state", required=True, help="tmsv:q_sq=..,herald_eff=..")
    ora.add_argument("--detector", default="photoelectric:eta=1")
    ora.add_argument("-N", type=int, default=2)
    ora.add_argument("-L", type=int, default=5, help="largest herald outcome")
    ora.add_argument("--csv", action="store_true")
    ora.add_argument("--out")
    ora.add_argument("--config")

    cal = sub.add_parser("calibrate", help="fit n = aE^2 + bE + c and optionally bin raw readings")
    cal.add_argument("points", help="CSV with header energy,n")
    cal.add_argument("--readings", nargs="+", help="one file of scalar readings per detector")
    cal.add_argument("-K", type=int, default=None)
    cal.add_argument("--edges", help="explicit comma-separated interval edges")
    cal.add_argument("--coincidences", help="output counts CSV for binned readings")
    cal.add_argument("--out")

    rep = sub.add_parser("report", help="collect analyze reports into a CSV table")
    rep.add_argument("reports", nargs="+")
    rep.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(run_config_from_args(args))
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        if args.command == "calibrate":
            return cmd_calibrate(args)
        return cmd_report(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ClickStatsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
