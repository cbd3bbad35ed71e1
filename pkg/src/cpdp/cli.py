"""Command-line entry point: ``cpdp detect`` and ``cpdp bench``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Optional, Sequence

from .baselines import pelt_result, run_mcmc_nolabel
from .bench import METHODS, HarnessSettings, run_benchmark
from .io import ConfigError, DataError, parse_series_csv, read_config, result_to_json
from .model import Hyperparams, ValidationError
from .sampler import SamplerSettings, run_chain, summarize
from .synth import ScenarioConfig, scenario_name

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InternalError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# config-file key -> value type (None marks a boolean)
_DETECT_KEYS = {
    "iterations": int, "burn_in": int, "seed": int, "threshold": float, "window": int,
    "alpha": float, "gamma": float, "mean_loc": float, "mean_scale": float,
    "noise_shape": float, "classvar_shape": float, "classvar_scale": float, "k_max": int,
    "eppf": None, "baseline": str, "penalty": float, "min_seg_len": int,
}
_HARNESS_KEYS = {f.name: f.type for f in fields(HarnessSettings)}
_SCENARIO_KEYS = {f.name: f.type for f in fields(ScenarioConfig)}


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _convert(key: str, value: str, kind):
    try:
        if kind is None or kind == "bool" or kind is bool:
            return _bool(value)
        if key.endswith("_range") or key.endswith("_bracket"):
            parts = [p for p in value.replace(",", " ").split() if p]
            conv = float if key.endswith("_bracket") else int
            if len(parts) != 2:
                raise ValueError
            return tuple(conv(p) for p in parts)
        if kind in (int, "int"):
            return int(value)
        if kind in (float, "float"):
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def _env_seed() -> Optional[int]:
    raw = os.environ.get("CPDP_SEED")
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CPDP_SEED must be an integer, got {raw!r}") from None


def _merge(args, keys, path) -> dict:
    """Config-file values overridden by explicitly given flags."""
    conf = {}
    if path is not None:
        for k, v in read_config(path, keys).items():
            conf[k] = _convert(k, v, keys[k])
    for k in keys:
        val = getattr(args, k, None)
        if val is not None:
            conf[k] = val
    if "seed" in keys and conf.get("seed") is None:
        env = _env_seed()
        conf["seed"] = env if env is not None else 0
    return conf


def _detect(args) -> int:
    conf = _merge(args, _DETECT_KEYS, args.config)
    x = parse_series_csv(args.input)
    if x.n < 4:
        raise UsageError(f"series has {x.n} points; at least 4 are needed")
    baseline = conf.get("baseline")
    if baseline not in (None, "mcmc", "pelt"):
        raise UsageError(f"unknown baseline {baseline!r}; expected mcmc or pelt")
    if baseline == "pelt":
        result = pelt_result(x, conf.get("penalty"), conf.get("min_seg_len", 2))
        result.seed = conf["seed"]
    else:
        hyper_kw = {k: conf[k] for k in ("alpha", "mean_loc", "mean_scale", "noise_shape",
                                         "classvar_shape", "classvar_scale", "k_max")
                    if k in conf}
        if "gamma" in conf:
            hyper_kw["noise_scale"] = conf["gamma"]
        if "eppf" in conf:
            hyper_kw["eppf_in_ratio"] = conf["eppf"]
        hyper = Hyperparams(**hyper_kw)
        iterations = conf.get("iterations", SamplerSettings.iterations)
        burn_in = conf.get("burn_in", min(SamplerSettings.burn_in, iterations // 2))
        settings = SamplerSettings(
            iterations=iterations, burn_in=burn_in, seed=conf["seed"],
            threshold=conf.get("threshold", SamplerSettings.threshold),
            window=conf.get("window", SamplerSettings.window))
        hyper.resolve_k_max(x.n)
        try:
            if baseline == "mcmc":
                result = run_mcmc_nolabel(x, hyper, settings)
                method = "mcmc"
                hyper = replace(hyper, eppf_in_ratio=False)
            else:
                result = summarize(run_chain(x, hyper, settings), settings, x, hyper)
                method = "proposed"
        except ValidationError as exc:
            # inputs were validated above, so this is a sampler bug
            raise InternalError(str(exc)) from exc
        result.settings = {"method": method, "sampler": result.settings,
                           "hyper": asdict(hyper), "input": str(args.input)}
    text = result_to_json(result)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _bench(args) -> int:
    keys = {**_SCENARIO_KEYS, **_HARNESS_KEYS, "jobs": int, "methods": str}
    conf = _merge(args, keys, args.config)
    if "scenario" not in conf:
        raise UsageError("--scenario is required (random or repeating)")
    conf["scenario"] = scenario_name(conf["scenario"])
    cfg = ScenarioConfig(**{k: conf[k] for k in _SCENARIO_KEYS if k in conf})
    harness = HarnessSettings(**{k: conf[k] for k in _HARNESS_KEYS if k in conf})
    methods = conf.get("methods", ",".join(METHODS))
    methods = tuple(m.strip() for m in methods.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; valid methods: {', '.join(METHODS)}")
    report = run_benchmark(cfg, methods, harness, jobs=conf.get("jobs", 1))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"bench_{cfg.scenario}_seed{cfg.seed}"
    (out_dir / f"{stem}.csv").write_text(report.to_csv())
    (out_dir / f"{stem}.json").write_text(report.to_json())
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpdp", description="Bayesian mean-shift change-point detection")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    d = sub.add_parser("detect", help="detect change points in a CSV series")
    d.add_argument("input", help="CSV file: one value per line or index,value")
    d.add_argument("--config", help="key=value file; flags override it")
    d.add_argument("--iterations", type=int)
    d.add_argument("--burn-in", dest="burn_in", type=int)
    d.add_argument("--seed", type=int, help="default: config, then $CPDP_SEED, then 0")
    d.add_argument("--alpha", type=float, help="DP concentration")
    d.add_argument("--gamma", type=float, help="noise prior scale")
    d.add_argument("--threshold", type=float, help="summary threshold in (0, 1)")
    d.add_argument("--window", type=int, help="summary pooling half-width")
    d.add_argument("--no-eppf", dest="eppf", action="store_const", const=False,
                   help="drop the partition prior from the move ratios")
    d.add_argument("--baseline", choices=("mcmc", "pelt"))
    d.add_argument("--penalty", type=float, help="PELT penalty (default: BIC-style)")
    d.add_argument("--out", help="write JSON here instead of stdout")
    d.set_defaults(func=_detect)

    b = sub.add_parser("bench", help="run the synthetic benchmark")
    b.add_argument("--scenario", help="random or repeating")
    b.add_argument("--realizations", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--jobs", type=int, help="parallel workers")
    b.add_argument("--iterations", type=int)
    b.add_argument("--burn-in", dest="burn_in", type=int)
    b.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    b.add_argument("--config", help="key=value file; flags override it")
    b.add_argument("--out-dir", default="bench_out")
    b.set_defaults(func=_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"cpdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"cpdp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValidationError as exc:
        print(f"cpdp: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssertionError, InternalError) as exc:
        print(f"cpdp: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
