"""Command-line sweep runner.

Settings come from an optional flat ``key = value`` file (``#`` starts a
comment) and are overridden by flags.  Exit status: 0 success, 2 bad
configuration, 3 I/O failure, 4 numerical invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from .experiments import (
    OBSERVABLES,
    ConfigError,
    ExperimentConfig,
    NumericalInvariantError,
    emit_csv,
    log_grid,
    run_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

CONFIG_KEYS = {
    "steps", "size", "decohere", "coin_init", "p_list", "p_log", "epsilon",
    "horizon", "observables", "out", "neg_every", "workers",
}

log = logging.getLogger("coinwalk")


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise _ArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coinwalk", description="Sweep decoherence rates for coined quantum walks.")
    p.add_argument("--config", type=Path, help="key = value settings file")
    geo = p.add_mutually_exclusive_group()
    geo.add_argument("--steps", type=int, help="walk on the line for this many steps")
    geo.add_argument("--size", type=int, help="walk on a cycle with this many sites")
    p.add_argument("--decohere", choices=["none", "coin", "position", "both"])
    p.add_argument("--coin-init", choices=["phase", "angle", "minus", "plus"])
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--p-list", help="comma-separated decoherence rates")
    grid.add_argument("--p-log", nargs=3, metavar=("START", "STOP", "COUNT"),
                      help="COUNT rates 10**e, e evenly spaced from START to STOP")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--horizon", type=int, help="cycle time horizon (default 20*N)")
    p.add_argument("--observables", help=f"comma-separated subset of {','.join(OBSERVABLES)}")
    p.add_argument("--neg-every", type=int, help="negativity stride; 0 = final step only")
    p.add_argument("--workers", type=int, help="parallel sweep points")
    p.add_argument("--out", help="output stem; writes <stem>_series.csv and <stem>_summary.csv")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def read_config_file(path: Path) -> dict[str, str]:
    """Parse ``key = value`` lines; keys may use ``-`` or ``_``."""
    settings: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}", "expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}", f"unknown key {key!r}")
            settings[key] = value
    return settings


def _int(field: str, value) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected an integer, got {value!r}") from None


def _float(field: str, value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {value!r}") from None


def config_from_settings(settings: dict) -> ExperimentConfig:
    """Build a validated config from string (file) or typed (flag) values."""
    steps, size = settings.get("steps"), settings.get("size")
    if (steps is None) == (size is None):
        raise ConfigError("geometry", "give exactly one of steps (line) or size (cycle)")
    kind, extent = ("line", _int("steps", steps)) if steps is not None else ("cycle", _int("size", size))

    if settings.get("p_list") is not None and settings.get("p_log") is not None:
        raise ConfigError("p_grid", "p_list and p_log are mutually exclusive")
    if settings.get("p_list") is not None:
        items = [s for s in str(settings["p_list"]).replace(",", " ").split()]
        p_grid = tuple(_float("p_list", s) for s in items)
    elif settings.get("p_log") is not None:
        parts = settings["p_log"]
        if isinstance(parts, str):
            parts = parts.replace(",", " ").split()
        if len(parts) != 3:
            raise ConfigError("p_log", "expected START STOP COUNT")
        p_grid = log_grid(_float("p_log", parts[0]), _float("p_log", parts[1]), _int("p_log", parts[2]))
    else:
        raise ConfigError("p_grid", "give p_list or p_log")

    observables = settings.get("observables")
    if observables is not None:
        observables = frozenset(s.strip() for s in str(observables).split(",") if s.strip())

    kwargs = {}
    if settings.get("decohere") is not None:
        kwargs["target"] = str(settings["decohere"])
    if settings.get("coin_init") is not None:
        kwargs["coin_init"] = str(settings["coin_init"])
    if settings.get("epsilon") is not None:
        kwargs["epsilon"] = _float("epsilon", settings["epsilon"])
    if settings.get("horizon") is not None:
        kwargs["horizon"] = _int("horizon", settings["horizon"])
    if settings.get("neg_every") is not None:
        kwargs["neg_every"] = _int("neg_every", settings["neg_every"])
    if settings.get("workers") is not None:
        kwargs["workers"] = _int("workers", settings["workers"])
    if settings.get("out") is not None:
        kwargs["out"] = str(settings["out"])
    return ExperimentConfig(kind, extent, p_grid, observables=observables, **kwargs)


def _merge(args: argparse.Namespace) -> dict:
    settings: dict = read_config_file(args.config) if args.config else {}
    flags = {
        "steps": args.steps, "size": args.size, "decohere": args.decohere,
        "coin_init": args.coin_init, "p_list": args.p_list, "p_log": args.p_log,
        "epsilon": args.epsilon, "horizon": args.horizon, "observables": args.observables,
        "neg_every": args.neg_every, "workers": args.workers, "out": args.out,
    }
    given = {k: v for k, v in flags.items() if v is not None}
    # a flag for one geometry or grid form replaces the file's alternative
    for a, b in (("steps", "size"), ("p_list", "p_log")):
        if a in given:
            settings.pop(b, None)
        if b in given:
            settings.pop(a, None)
    settings.update(given)
    return settings


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ArgumentError as exc:
        print(f"coinwalk: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_settings(_merge(args))
        if cfg.out is None:
            raise ConfigError("out", "an output stem is required")
    except ConfigError as exc:
        print(f"coinwalk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"coinwalk: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        result = run_experiment(cfg)
    except (NumericalInvariantError, AssertionError) as exc:
        print(f"coinwalk: numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    try:
        paths = emit_csv(result, cfg.out)
    except OSError as exc:
        print(f"coinwalk: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
