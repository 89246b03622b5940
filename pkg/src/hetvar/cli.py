"""Command line entry point: ``hetvar <command> [options]``.

Commands: ``table1``, ``oracle-reject``, ``plugin-reject``, ``gen-data``.
Values from ``--config`` (TOML or JSON, keys named like
:class:`~hetvar.harness.ExperimentConfig` fields) are overridden by flags.
The seed falls back to ``$HETVAR_SEED`` when neither sets it.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from ._errors import InputError, NumericalError
from .harness import ExperimentConfig, run_oracle_reject, run_plugin_reject, run_table1
from .simdata import MODELS, generate
from .rng import stream

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ConfigError(message)


def _csv_list(text, conv=str):
    return [conv(t) for t in text.split(",") if t.strip()]


def build_parser():
    p = _Parser(prog="hetvar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--model", help=f"comma-separated model ids: {', '.join(MODELS)}")
        sp.add_argument("--n", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (file for gen-data)")
        sp.add_argument("--config", help="TOML or JSON config file")
        sp.add_argument("-v", "--verbose", action="store_true")

    for name in ("table1", "oracle-reject", "plugin-reject"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--N", type=int, dest="N")
        sp.add_argument("--T", type=int, dest="T")
        sp.add_argument("--calib-size", type=int, dest="calib_size")
        sp.add_argument("--reps", type=int)
        sp.add_argument("--epsilons", type=lambda s: _csv_list(s, float))
        sp.add_argument("--methods", type=_csv_list)
        sp.add_argument("--threads", type=int)
    gen = sub.add_parser("gen-data")
    common(gen)
    return p


def _load_config(path):
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise _ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise _ConfigError(f"cannot parse config {path}: {exc}") from exc
    known = {f.name for f in fields(ExperimentConfig)}
    aliases = {"model": "model_ids", "models": "model_ids", "out": "output_dir"}
    out = {}
    for key, value in data.items():
        key = aliases.get(key, key)
        if key not in known:
            raise _ConfigError(f"unknown config key {key!r}; valid: {', '.join(sorted(known))}")
        out[key] = value
    if isinstance(out.get("model_ids"), str):
        out["model_ids"] = _csv_list(out["model_ids"])
    return out


def _resolve(args):
    values = _load_config(args.config) if args.config else {}
    flags = {
        "model_ids": _csv_list(args.model) if args.model else None,
        "n": args.n, "seed": args.seed, "output_dir": args.out,
    }
    for name in ("N", "T", "calib_size", "reps", "epsilons", "methods", "threads"):
        flags[name] = getattr(args, name, None)
    values.update({k: v for k, v in flags.items() if v is not None})
    if "seed" not in values and os.environ.get("HETVAR_SEED"):
        try:
            values["seed"] = int(os.environ["HETVAR_SEED"])
        except ValueError as exc:
            raise _ConfigError(f"HETVAR_SEED is not an integer: {exc}") from exc
    if not values.get("model_ids"):
        raise _ConfigError(f"--model is required; valid: {', '.join(MODELS)}")
    for key in ("model_ids", "epsilons", "methods"):
        if values.get(key) is not None:
            values[key] = tuple(values[key])
    return values


def _gen_data(values):
    models = values["model_ids"]
    if len(models) != 1:
        raise InputError("gen-data takes exactly one model")
    data = generate(models[0], values.get("n", 1000), stream(values.get("seed", 0)))
    out = values.get("output_dir")
    if out:
        data.to_csv(out)
    else:
        w = sys.stdout
        w.write(",".join([f"x{j + 1}" for j in range(data.d)] + ["y"]) + "\n")
        for row, yi in zip(data.x, data.y):
            w.write(",".join(repr(float(v)) for v in (*row, yi)) + "\n")


RUNNERS = {"table1": run_table1, "oracle-reject": run_oracle_reject,
           "plugin-reject": run_plugin_reject}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(asctime)s %(name)s %(message)s")
        values = _resolve(args)
        if args.command == "gen-data":
            _gen_data(values)
            return EXIT_OK
        cfg = ExperimentConfig(**values)
    except (_ConfigError, InputError, TypeError) as exc:
        print(f"hetvar: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = RUNNERS[args.command](cfg)
    except (NumericalError, InputError, OSError) as exc:
        print(f"hetvar: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if res.failures:
        print(f"hetvar: {res.failures} replication(s) failed", file=sys.stderr)
    if not cfg.output_dir:
        for row in res.summary:
            print(json.dumps(row))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
