"""Shared helpers for the experiment scripts: dataclass configs <-> argparse, CSV output."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path


def parser_for(cfg_cls, description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cfg_cls):
        flag = "--" + f.name.replace("_", "-")
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            p.add_argument(flag, type=kind, nargs="+", default=default)
        elif isinstance(default, bool):
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif default is None:
            p.add_argument(flag, default=None)
        else:
            p.add_argument(flag, type=type(default), default=default)
    return p


def config_from_args(cfg_cls, args: argparse.Namespace):
    values = {f.name: getattr(args, f.name) for f in dataclasses.fields(cfg_cls)}
    return cfg_cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in values.items()})


def write_rows(rows: list[dict], out: str | None, cfg) -> None:
    if not rows:
        return
    handle = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(handle, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    finally:
        if out:
            handle.close()
    if out:
        Path(out).with_suffix(".json").write_text(json.dumps(dataclasses.asdict(cfg), indent=2) + "\n")
