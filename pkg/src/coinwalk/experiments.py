"""Decoherence-rate sweeps on the line and the cycle, with CSV output."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import DecoherenceSpec, DecoherenceTarget, ObserverError, evolve
from .entanglement import MissingDataPoint, negativity
from .observables import (
    NOT_MIXED,
    MixingRecord,
    cycle_reference,
    mixing_time,
    running_time_average,
    std_dev,
    top_hat_reference,
    tvd,
    uniform_cycle,
)
from .state import CoinInitialState, GeometryKind, WalkGeometry, make_initial_state, position_marginal

__all__ = [
    "OBSERVABLES",
    "MISSING",
    "ConfigError",
    "NumericalInvariantError",
    "ExperimentConfig",
    "PointResult",
    "SweepResult",
    "log_grid",
    "run_point",
    "run_experiment",
    "run_line_experiment",
    "run_cycle_experiment",
    "emit_csv",
    "format_float",
]

log = logging.getLogger(__name__)

OBSERVABLES = (
    "distribution",
    "sigma",
    "tvd",
    "tvd_timeavg",
    "negativity",
    "mixing_time",
    "mixing_time_timeavg",
)
LINE_OBSERVABLES = frozenset({"distribution", "sigma", "tvd", "negativity"})
CYCLE_OBSERVABLES = frozenset(OBSERVABLES) - {"sigma"}
SERIES_OBSERVABLES = ("tvd", "tvd_timeavg", "negativity", "sigma")
DEFAULT_OBSERVABLES = {
    GeometryKind.LINE: frozenset({"sigma", "tvd", "negativity"}),
    GeometryKind.CYCLE: CYCLE_OBSERVABLES - {"distribution"},
}

SERIES_HEADER = ("p", "t", "tvd", "tvd_timeavg", "negativity", "sigma")
SUMMARY_HEADER = ("p", "final_tvd", "final_negativity", "mixing_time", "mixing_time_timeavg")

INVARIANT_TOL = 1e-10
CYCLE_HORIZON_FACTOR = 20


class _Missing:
    """Marker for a negativity value the eigensolver could not produce."""

    def __repr__(self) -> str:
        return "MISSING"

    def __reduce__(self):
        return (_missing, ())


def _missing() -> "_Missing":
    return MISSING


MISSING = _Missing()


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NumericalInvariantError(ArithmeticError):
    pass


def log_grid(start_exponent: float, stop_exponent: float, count: int) -> tuple[float, ...]:
    """``count`` rates ``10**e`` with ``e`` evenly spaced from start to stop."""
    if count < 1:
        raise ConfigError("p_log", "count must be at least 1")
    return tuple(float(v) for v in np.logspace(start_exponent, stop_exponent, int(count)))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: GeometryKind
    extent: int
    p_grid: tuple[float, ...]
    coin_init: CoinInitialState = CoinInitialState.PHASE
    target: DecoherenceTarget = DecoherenceTarget.BOTH
    epsilon: float = 0.002
    horizon: int | None = None
    observables: frozenset[str] | None = None
    out: str | None = None
    neg_every: int = 1
    workers: int = 1

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", GeometryKind(self.kind))
        except ValueError:
            raise ConfigError("geometry", f"unknown geometry {self.kind!r}") from None
        try:
            object.__setattr__(self, "coin_init", CoinInitialState(self.coin_init))
        except ValueError:
            raise ConfigError("coin_init", f"unknown coin state {self.coin_init!r}") from None
        try:
            object.__setattr__(self, "target", DecoherenceTarget(self.target))
        except ValueError:
            raise ConfigError("decohere", f"unknown decoherence target {self.target!r}") from None
        name = "steps" if self.kind is GeometryKind.LINE else "size"
        if not isinstance(self.extent, (int, np.integer)) or self.extent < 1:
            raise ConfigError(name, f"must be a positive integer, got {self.extent!r}")
        if self.kind is GeometryKind.CYCLE and self.extent < 2:
            raise ConfigError("size", "a cycle needs at least 2 sites")

        grid = tuple(float(p) for p in self.p_grid)
        if not grid:
            raise ConfigError("p_grid", "at least one decoherence rate is required")
        if any(not 0.0 <= p <= 1.0 for p in grid):
            raise ConfigError("p_grid", "rates must lie in [0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("p_grid", "rates must be strictly increasing")
        object.__setattr__(self, "p_grid", grid)

        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError("epsilon", "must be positive")
        if self.kind is GeometryKind.LINE:
            if self.horizon is not None and self.horizon != self.extent:
                raise ConfigError("horizon", "on the line the horizon is the step count; omit it")
        elif self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon", "must be at least 1")

        allowed = LINE_OBSERVABLES if self.kind is GeometryKind.LINE else CYCLE_OBSERVABLES
        obs = DEFAULT_OBSERVABLES[self.kind] if self.observables is None else frozenset(self.observables)
        unknown = obs - frozenset(OBSERVABLES)
        if unknown:
            raise ConfigError("observables", f"unknown observables {sorted(unknown)}")
        wrong = obs - allowed
        if wrong:
            raise ConfigError("observables", f"{sorted(wrong)} not available on the {self.kind.value}")
        object.__setattr__(self, "observables", obs)

        if self.neg_every < 0:
            raise ConfigError("neg_every", "must be nonnegative (0 = final step only)")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")

    @property
    def geometry(self) -> WalkGeometry:
        return WalkGeometry(self.kind, self.extent)

    @property
    def effective_horizon(self) -> int:
        if self.kind is GeometryKind.LINE:
            return self.extent
        if self.horizon is not None:
            return self.horizon
        return CYCLE_HORIZON_FACTOR * self.extent

    def echo(self) -> list[tuple[str, str]]:
        """Key/value pairs describing the run, in a fixed order."""
        geometry = ("steps" if self.kind is GeometryKind.LINE else "size", str(self.extent))
        return [
            ("geometry", self.kind.value),
            geometry,
            ("coin_init", self.coin_init.value),
            ("decohere", self.target.value),
            ("p_grid", " ".join(format_float(p) for p in self.p_grid)),
            ("epsilon", format_float(self.epsilon)),
            ("horizon", str(self.effective_horizon)),
            ("observables", ",".join(o for o in OBSERVABLES if o in self.observables)),
            ("neg_every", str(self.neg_every)),
        ]


@dataclass
class PointResult:
    """Everything recorded for one decoherence rate.

    Series entries are ``None`` where an observable was not requested or not
    evaluated at that step, and :data:`MISSING` where evaluation failed.
    """

    p: float
    horizon: int
    tvd: list = field(default_factory=list)
    tvd_timeavg: list = field(default_factory=list)
    negativity: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    final_tvd: float | None = None
    final_negativity: object = None
    mixing_time: object = None
    mixing_time_timeavg: object = None
    final_distribution: np.ndarray | None = None


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list[PointResult]

    @property
    def horizon(self) -> int:
        return self.config.effective_horizon

    def point(self, p: float) -> PointResult:
        for pt in self.points:
            if pt.p == p:
                return pt
        raise KeyError(p)


def _negativity_steps(horizon: int, every: int) -> set[int]:
    steps = {horizon}
    if every > 0:
        steps.update(range(0, horizon + 1, every))
    return steps


def run_point(cfg: ExperimentConfig, p: float) -> PointResult:
    """Evolve one decoherence rate and collect the requested observables."""
    g = cfg.geometry
    horizon = cfg.effective_horizon
    obs = cfg.observables
    is_line = g.is_line
    spec = DecoherenceSpec(cfg.target, p)
    neg_steps = _negativity_steps(horizon, cfg.neg_every) if "negativity" in obs else set()
    need_tvd = bool(obs & {"tvd", "mixing_time"})
    need_dists = not is_line and bool(obs & {"tvd_timeavg", "mixing_time_timeavg"})

    result = PointResult(p=p, horizon=horizon)
    n_rows = horizon + 1
    inst = [None] * n_rows
    neg = [None] * n_rows
    sig = [None] * n_rows
    dists = np.zeros((n_rows, g.position_count)) if need_dists else None

    def observe(t: int, rho) -> None:
        err = rho.trace_error()
        if not err <= INVARIANT_TOL:
            raise NumericalInvariantError(f"trace drifted by {err:.3e} at step {t} (p={p})")
        P = position_marginal(rho)
        if need_tvd:
            ref = top_hat_reference(t, g) if is_line else cycle_reference(g, t)
            inst[t] = tvd(P, ref)
        if dists is not None:
            dists[t] = P
        if "sigma" in obs:
            sig[t] = std_dev(P, g)
        if t in neg_steps:
            try:
                neg[t] = negativity(rho).value
            except MissingDataPoint as exc:
                log.warning("p=%s t=%d: negativity missing (%s)", p, t, exc)
                neg[t] = MISSING
        if t == horizon and "distribution" in obs:
            result.final_distribution = P.copy()

    try:
        final = evolve(make_initial_state(g, cfg.coin_init), spec, horizon, [observe])
    except ObserverError as exc:
        if isinstance(exc.__cause__, NumericalInvariantError):
            raise exc.__cause__ from None
        raise
    herm = final.hermiticity_error()
    if not herm <= INVARIANT_TOL:
        raise NumericalInvariantError(f"Hermiticity violated by {herm:.3e} (p={p})")

    if "tvd" in obs:
        result.tvd = inst
        result.final_tvd = inst[horizon]
    if "negativity" in obs:
        result.negativity = neg
        result.final_negativity = neg[horizon]
    if "sigma" in obs:
        result.sigma = sig
    if "mixing_time" in obs:
        result.mixing_time = mixing_time(MixingRecord(np.asarray(inst, dtype=float), cfg.epsilon))
    if dists is not None:
        u = uniform_cycle(g)
        avg_tvd = [tvd(P, u) for P in running_time_average(dists)]
        if "tvd_timeavg" in obs:
            result.tvd_timeavg = avg_tvd
        if "mixing_time_timeavg" in obs:
            result.mixing_time_timeavg = mixing_time(MixingRecord(np.asarray(avg_tvd), cfg.epsilon))
    return result


def run_experiment(cfg: ExperimentConfig) -> SweepResult:
    """Run every rate in ``cfg.p_grid``; results keep the grid order."""
    if cfg.workers > 1 and len(cfg.p_grid) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(cfg.p_grid))) as pool:
            points = list(pool.map(run_point, [cfg] * len(cfg.p_grid), cfg.p_grid))
    else:
        points = [run_point(cfg, p) for p in cfg.p_grid]
    return SweepResult(cfg, points)


def run_line_experiment(cfg: ExperimentConfig) -> SweepResult:
    if cfg.kind is not GeometryKind.LINE:
        raise ConfigError("geometry", "expected a line configuration")
    return run_experiment(cfg)


def run_cycle_experiment(cfg: ExperimentConfig) -> SweepResult:
    if cfg.kind is not GeometryKind.CYCLE:
        raise ConfigError("geometry", "expected a cycle configuration")
    return run_experiment(cfg)


# -- CSV --------------------------------------------------------------------


def format_float(v: float) -> str:
    return format(float(v), ".12g")


def _cell(v) -> str:
    if v is None:
        return ""
    if v is MISSING:
        return "NA"
    if v is NOT_MIXED:
        return "INF"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format_float(v)


def _metadata(result: SweepResult) -> list[str]:
    lines = [f"# {k}={v}" for k, v in result.config.echo()]
    if result.config.kind is GeometryKind.CYCLE:
        lines.append(f"# uniform_site_probability={format_float(1.0 / result.config.extent)}")
    return lines


def _series_lines(result: SweepResult) -> Iterable[str]:
    obs = result.config.observables
    requested = [o for o in SERIES_OBSERVABLES if o in obs]
    if not requested:
        return
    for pt in sorted(result.points, key=lambda r: r.p):
        cols = [getattr(pt, name) if name in requested else [] for name in SERIES_OBSERVABLES]
        for t in range(pt.horizon + 1):
            cells = [_cell(pt.p), str(t)]
            cells += [_cell(c[t]) if c else "" for c in cols]
            yield ",".join(cells)


def _summary_lines(result: SweepResult) -> Iterable[str]:
    for pt in sorted(result.points, key=lambda r: r.p):
        yield ",".join(
            [
                _cell(pt.p),
                _cell(pt.final_tvd),
                _cell(pt.final_negativity),
                _cell(pt.mixing_time),
                _cell(pt.mixing_time_timeavg),
            ]
        )


def _distribution_lines(result: SweepResult) -> Iterable[str]:
    positions = result.config.geometry.positions
    for pt in sorted(result.points, key=lambda r: r.p):
        for x, w in zip(positions, pt.final_distribution):
            yield f"{_cell(pt.p)},{int(x)},{_cell(w)}"


def _write_all(files: list[tuple[Path, list[str]]]) -> None:
    written: list[Path] = []
    try:
        for path, lines in files:
            tmp = path.with_name(path.name + ".part")
            written.append(tmp)
            with open(tmp, "w", newline="\n", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
        for path, _ in files:
            os.replace(path.with_name(path.name + ".part"), path)
    except OSError as exc:
        for tmp in written:
            tmp.unlink(missing_ok=True)
        raise OSError(f"failed writing {exc.filename or files[0][0]}: {exc.strerror or exc}") from exc


def emit_csv(result: SweepResult, path: str | os.PathLike) -> list[Path]:
    """Write ``<stem>_series.csv`` and ``<stem>_summary.csv`` (plus
    ``<stem>_distribution.csv`` when final distributions were recorded).

    The stem is ``path`` with any ``.csv`` suffix removed.  Returns the paths
    written.
    """
    stem = Path(path)
    if stem.suffix == ".csv":
        stem = stem.with_suffix("")
    meta = _metadata(result)
    files = [
        (stem.with_name(stem.name + "_series.csv"), meta + [",".join(SERIES_HEADER)] + list(_series_lines(result))),
        (stem.with_name(stem.name + "_summary.csv"), meta + [",".join(SUMMARY_HEADER)] + list(_summary_lines(result))),
    ]
    if "distribution" in result.config.observables:
        files.append(
            (stem.with_name(stem.name + "_distribution.csv"), meta + ["p,x,probability"] + list(_distribution_lines(result)))
        )
    _write_all(files)
    return [f for f, _ in files]
