"""Batch sweep front end producing CSV curve artifacts.

Reads a YAML sweep description, evaluates the requested metrics point by
point through both routes (closed-form analytics and the Monte Carlo
simulator), and writes one CSV per metric with a '#'-prefixed metadata
header.  Per-point failures never abort a sweep: the row keeps NaN values
plus an error tag, and the process exit code reports the partial failure.

Config schema (powers in dBm, SNRs and thresholds in dB, converted to
linear scale once at load; everything else SI)::

    name: demo                  # artifact stem, default: config file stem
    scenario:
      n_antennas: 1             # receive branches, n_antennas >= 1
      rf_fading: {alpha: 1.0, mu: 1.0, omega: 1.0}
      thz_fading: {alpha: 1.0, mu: 1.0, omega: 1.0}
      pointing: {phi: 4.0, s0: 1.0}     # or {w_eq_m: 0.6, sigma_s_m: 0.15}
      relay_c: null             # linear fixed-gain constant; null = semi-blind
      budget:                   # link-budget mode ...
        tx_power_dbm: 10.0
        rf_distance_m: 75.0
        rf_freq_hz: 6.0e+9
        rf_antenna_gain_dbi: 52.0       # combined Tx+Rx
        rf_bandwidth_hz: 2.0e+7
        rf_noise_figure_db: 5.0
        thz_distance_m: 50.0
        thz_freq_hz: 2.75e+11
        thz_antenna_gain_dbi: 110.0     # combined Tx+Rx
        thz_bandwidth_hz: 1.0e+10
        thz_noise_figure_db: 5.0
        thz_absorption_per_m: 2.8e-4
      # ... or direct mode:
      # avg_snr_rf_db: 40.0
      # avg_snr_thz_db: 40.0
    sweep:
      axis: avg_snr_db      # avg_snr_db | tx_power_dbm | rf_distance_m | n_antennas
      grid: [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0]
    metrics: [outage]           # subset of outage | ber | capacity | pdf
    gamma_th_db: 5.0            # outage threshold; also the pdf evaluation point
    modulation: bpsk            # bpsk | dbpsk | {p: 0.5, q: 1.0}
    mc_trials: 1000000          # >= 10000, or 0 to disable simulation
    seed: 1234                  # base seed; grid point i simulates with seed + i
    workers: 0                  # parallel grid workers; 0 = available CPUs
    output_path: out            # artifact directory

The ``avg_snr_db`` axis sets both hop average SNRs to the grid value
(budget or direct SNRs, when given, only fix the baseline echoed in the
header); ``tx_power_dbm`` and ``rf_distance_m`` re-derive the link budget
per point and therefore require the budget block; ``n_antennas`` needs an
integer grid.  A file may hold several YAML documents; ``run`` and
``validate`` process them in order.

CSV columns: x, metric, analytic, analytic_err, mc, mc_stderr, error.
Reruns with the same config and seed are byte-identical apart from the
'# generated:' header line.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import yaml

from thzrelay import __version__
from thzrelay.analytics import (
    BPSK,
    DBPSK,
    ModulationParams,
    compile_link,
    evaluate_metric,
)
from thzrelay.channels import (
    AlphaMuParams,
    PointingErrorParams,
    budget_from_avg_snrs,
    db_to_linear,
    linear_to_db,
    link_budget,
)
from thzrelay.montecarlo import Scenario, empirical_metrics, simulate

__all__ = [
    "ConfigError",
    "ConfigWarning",
    "SweepConfig",
    "Row",
    "CurveArtifact",
    "load_config",
    "load_config_stream",
    "scenario_at",
    "header_lines",
    "run_sweep",
    "preset_text",
    "main",
]

logger = logging.getLogger("thzrelay.cli")

_AXES = ("avg_snr_db", "tx_power_dbm", "rf_distance_m", "n_antennas")
_METRICS = ("outage", "ber", "capacity", "pdf")

_BUDGET_DEFAULTS = {
    "rf_freq_hz": 6.0e9,
    "rf_antenna_gain_dbi": 52.0,
    "rf_bandwidth_hz": 20.0e6,
    "rf_noise_figure_db": 5.0,
    "thz_distance_m": 50.0,
    "thz_freq_hz": 0.275e12,
    "thz_antenna_gain_dbi": 110.0,
    "thz_bandwidth_hz": 10.0e9,
    "thz_noise_figure_db": 5.0,
    "thz_absorption_per_m": 2.8e-4,
}

# Leaf None = scalar/list slot; nested dict = mapping slot.  Used only for
# unknown-key detection; value validation happens in the builders.
_SCHEMA: dict[str, Any] = {
    "name": None,
    "scenario": {
        "n_antennas": None,
        "rf_fading": {"alpha": None, "mu": None, "omega": None},
        "thz_fading": {"alpha": None, "mu": None, "omega": None},
        "pointing": {"phi": None, "s0": None, "sigma_s_m": None, "w_eq_m": None},
        "relay_c": None,
        "budget": {"tx_power_dbm": None, "rf_distance_m": None}
        | {key: None for key in _BUDGET_DEFAULTS},
        "avg_snr_rf_db": None,
        "avg_snr_thz_db": None,
    },
    "sweep": {"axis": None, "grid": None},
    "metrics": None,
    "gamma_th_db": None,
    "modulation": {"p": None, "q": None},
    "mc_trials": None,
    "seed": None,
    "workers": None,
    "output_path": None,
}


class ConfigError(ValueError):
    """Sweep configuration failed to parse or violated an invariant."""


class ConfigWarning(UserWarning):
    """Non-fatal configuration issue (unknown key outside strict mode)."""


@dataclass(frozen=True)
class SweepConfig:
    """Fully resolved sweep description; all quantities linear-scale."""

    name: str
    scenario: Scenario
    sweep_axis: str
    grid: tuple[float, ...]
    metrics: tuple[str, ...]
    gamma_th: float
    modulation: ModulationParams
    mc_trials: int
    seed: int
    workers: int
    output_path: str
    link_kwargs: dict[str, float] | None = None
    direct_snrs: tuple[float, float] | None = None
    relay_c: float | None = None

    def __post_init__(self) -> None:
        if self.sweep_axis not in _AXES:
            raise ConfigError(
                f"sweep.axis must be one of {', '.join(_AXES)}, got {self.sweep_axis!r}"
            )
        if not self.grid or any(
            b <= a for a, b in zip(self.grid, self.grid[1:])
        ):
            raise ConfigError("sweep.grid must be nonempty and strictly increasing")
        if not all(math.isfinite(x) for x in self.grid):
            raise ConfigError("sweep.grid values must be finite")
        if self.sweep_axis == "n_antennas" and any(
            x != int(x) or x < 1 for x in self.grid
        ):
            raise ConfigError(
                "sweep.grid: the n_antennas axis needs integer grid values >= 1"
            )
        if not self.metrics:
            raise ConfigError(
                f"metrics must name at least one of {', '.join(_METRICS)}"
            )
        for metric in self.metrics:
            if metric not in _METRICS:
                raise ConfigError(
                    f"metrics: unknown metric {metric!r} "
                    f"(choose from {', '.join(_METRICS)})"
                )
        if not (self.gamma_th > 0 and math.isfinite(self.gamma_th)):
            raise ConfigError("gamma_th_db must be a finite threshold")
        if self.mc_trials != 0 and self.mc_trials < 10_000:
            raise ConfigError(
                "mc_trials must be >= 10000 (or 0 to disable simulation)"
            )
        if self.mc_trials < 0:
            raise ConfigError("mc_trials cannot be negative")
        if self.workers < 0:
            raise ConfigError("workers cannot be negative")

    @property
    def mc_enabled(self) -> bool:
        return self.mc_trials > 0


class Row(NamedTuple):
    """One evaluated (grid point, metric) pair; NaN plus a tag on failure."""

    x: float
    metric: str
    analytic: float
    analytic_err: float
    mc: float
    mc_stderr: float
    error: str


@dataclass(frozen=True)
class CurveArtifact:
    """Sweep result: metadata header, rows in grid order, written files."""

    header: tuple[str, ...]
    rows: tuple[Row, ...]
    paths: tuple[Path, ...]
    n_failures: int


# ---------------------------------------------------------------------------
# config ingestion
# ---------------------------------------------------------------------------


def _as_float(value: Any, field: str) -> float:
    # str fallback: the YAML 1.1 resolver reads exponent forms like "1e6"
    # as strings unless they carry a dot and a signed exponent.
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"{field}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{field}: expected a number, got {value!r}")


def _as_int(value: Any, field: str) -> int:
    num = _as_float(value, field)
    if num != int(num):
        raise ConfigError(f"{field}: expected an integer, got {value!r}")
    return int(num)


def _as_map(value: Any, field: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{field}: expected a mapping, got {type(value).__name__}")
    return value


def _collect_unknown(node: Any, schema: Any, prefix: str, found: list[str]) -> None:
    if not isinstance(node, dict) or not isinstance(schema, dict):
        return
    for key, value in node.items():
        path = f"{prefix}{key}"
        if key not in schema:
            found.append(path)
        else:
            _collect_unknown(value, schema[key], f"{path}.", found)


def _parse_modulation(value: Any) -> ModulationParams:
    if value is None:
        return BPSK
    if isinstance(value, str):
        named = {"bpsk": BPSK, "dbpsk": DBPSK}
        try:
            return named[value.lower()]
        except KeyError:
            raise ConfigError(
                f"modulation: unknown name {value!r} (bpsk, dbpsk, or a {{p, q}} mapping)"
            ) from None
    node = _as_map(value, "modulation")
    try:
        return ModulationParams(
            _as_float(node.get("p"), "modulation.p"),
            _as_float(node.get("q"), "modulation.q"),
            "custom",
        )
    except ValueError as exc:
        raise ConfigError(f"modulation: {exc}") from exc


def _parse_fading(node: Any, field: str) -> AlphaMuParams:
    mapping = _as_map(node, field)
    try:
        return AlphaMuParams(
            alpha=_as_float(mapping.get("alpha"), f"{field}.alpha"),
            mu=_as_float(mapping.get("mu"), f"{field}.mu"),
            omega=_as_float(mapping.get("omega", 1.0), f"{field}.omega"),
        )
    except ValueError as exc:
        raise ConfigError(f"{field}: {exc}") from exc


def _parse_pointing(node: Any) -> PointingErrorParams:
    field = "scenario.pointing"
    mapping = _as_map(node, field)
    s0 = _as_float(mapping.get("s0", 1.0), f"{field}.s0")
    has_geometry = "sigma_s_m" in mapping or "w_eq_m" in mapping
    try:
        if "phi" in mapping:
            sigma = mapping.get("sigma_s_m")
            w_eq = mapping.get("w_eq_m")
            return PointingErrorParams(
                phi=_as_float(mapping["phi"], f"{field}.phi"),
                s0=s0,
                sigma_s=None if sigma is None else _as_float(sigma, f"{field}.sigma_s_m"),
                w_eq=None if w_eq is None else _as_float(w_eq, f"{field}.w_eq_m"),
            )
        if has_geometry:
            return PointingErrorParams.from_jitter(
                beam_radius_m=_as_float(mapping.get("w_eq_m"), f"{field}.w_eq_m"),
                jitter_std_m=_as_float(mapping.get("sigma_s_m"), f"{field}.sigma_s_m"),
                s0=s0,
            )
    except ValueError as exc:
        raise ConfigError(f"{field}: {exc}") from exc
    raise ConfigError(f"{field}: give phi or the pair (w_eq_m, sigma_s_m)")


def _parse_scenario(
    node: Any, axis: str, first_grid_value: float
) -> tuple[Scenario, dict[str, float] | None, tuple[float, float] | None, float | None]:
    mapping = _as_map(node, "scenario")
    n_antennas = _as_int(mapping.get("n_antennas", 1), "scenario.n_antennas")
    if n_antennas < 1:
        raise ConfigError(
            f"scenario.n_antennas: constraint n_antennas ≥ 1 violated "
            f"(got {n_antennas})"
        )
    rf_fading = _parse_fading(mapping.get("rf_fading", {"alpha": 1.0, "mu": 1.0}),
                              "scenario.rf_fading")
    thz_fading = _parse_fading(mapping.get("thz_fading", {"alpha": 1.0, "mu": 1.0}),
                               "scenario.thz_fading")
    pointing = _parse_pointing(mapping.get("pointing", {"phi": 4.0}))

    relay_c = mapping.get("relay_c")
    if relay_c is not None:
        relay_c = _as_float(relay_c, "scenario.relay_c")
        if relay_c <= 0:
            raise ConfigError("scenario.relay_c must be positive (or null for semi-blind)")

    has_budget = "budget" in mapping and mapping["budget"] is not None
    has_direct = "avg_snr_rf_db" in mapping or "avg_snr_thz_db" in mapping
    if has_budget and has_direct:
        raise ConfigError(
            "scenario: give either a budget block or avg_snr_rf_db/avg_snr_thz_db, not both"
        )

    link_kwargs: dict[str, float] | None = None
    direct_snrs: tuple[float, float] | None = None
    if has_budget:
        raw = _as_map(mapping["budget"], "scenario.budget")
        for key in ("tx_power_dbm", "rf_distance_m"):
            if key not in raw:
                raise ConfigError(f"scenario.budget.{key} is required")
        link_kwargs = dict(_BUDGET_DEFAULTS)
        for key in ("tx_power_dbm", "rf_distance_m", *_BUDGET_DEFAULTS):
            if key in raw:
                link_kwargs[key] = _as_float(raw[key], f"scenario.budget.{key}")
        try:
            budget = link_budget(relay_c=relay_c, **link_kwargs)
        except ValueError as exc:
            raise ConfigError(f"scenario.budget: {exc}") from exc
    elif has_direct:
        if "avg_snr_rf_db" not in mapping or "avg_snr_thz_db" not in mapping:
            raise ConfigError(
                "scenario: avg_snr_rf_db and avg_snr_thz_db must be given together"
            )
        snr_rf = db_to_linear(_as_float(mapping["avg_snr_rf_db"], "scenario.avg_snr_rf_db"))
        snr_thz = db_to_linear(_as_float(mapping["avg_snr_thz_db"], "scenario.avg_snr_thz_db"))
        direct_snrs = (snr_rf, snr_thz)
        budget = budget_from_avg_snrs(snr_rf, snr_thz, relay_c=relay_c)
    elif axis == "avg_snr_db":
        baseline = db_to_linear(first_grid_value)
        budget = budget_from_avg_snrs(baseline, baseline, relay_c=relay_c)
    else:
        raise ConfigError(
            f"scenario: a budget block (or direct average SNRs) is required "
            f"for sweep axis {axis}"
        )
    if axis in ("tx_power_dbm", "rf_distance_m") and link_kwargs is None:
        raise ConfigError(
            f"scenario.budget block is required for sweep axis {axis} "
            f"(the axis re-derives the link budget per point)"
        )

    scenario = Scenario.uniform(n_antennas, rf_fading, thz_fading, pointing, budget)
    return scenario, link_kwargs, direct_snrs, relay_c


def _build_config(doc: Any, *, default_name: str, strict: bool) -> SweepConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping of config keys")

    unknown: list[str] = []
    _collect_unknown(doc, _SCHEMA, "", unknown)
    if unknown:
        message = "unknown config key(s): " + ", ".join(sorted(unknown))
        if strict:
            raise ConfigError(message)
        warnings.warn(message, ConfigWarning, stacklevel=3)

    sweep = _as_map(doc.get("sweep", {"axis": "avg_snr_db"}), "sweep")
    axis = sweep.get("axis", "avg_snr_db")
    if not isinstance(axis, str):
        raise ConfigError(f"sweep.axis must be a string, got {axis!r}")
    raw_grid = sweep.get("grid", [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0])
    if not isinstance(raw_grid, (list, tuple)) or not raw_grid:
        raise ConfigError("sweep.grid must be a nonempty list of numbers")
    grid = tuple(_as_float(x, f"sweep.grid[{i}]") for i, x in enumerate(raw_grid))

    raw_metrics = doc.get("metrics")
    if raw_metrics is None:
        raise ConfigError(
            f"metrics must name at least one of {', '.join(_METRICS)}"
        )
    if isinstance(raw_metrics, str):
        raw_metrics = [raw_metrics]
    if not isinstance(raw_metrics, (list, tuple)):
        raise ConfigError("metrics must be a list of metric names")
    metrics = tuple(dict.fromkeys(str(m) for m in raw_metrics))

    scenario, link_kwargs, direct_snrs, relay_c = _parse_scenario(
        doc.get("scenario", {}), axis, grid[0]
    )

    name = str(doc.get("name", default_name)) or default_name
    safe_name = "".join(c if (c.isalnum() or c in "._-") else "_" for c in name)

    return SweepConfig(
        name=safe_name,
        scenario=scenario,
        sweep_axis=axis,
        grid=grid,
        metrics=metrics,
        gamma_th=db_to_linear(_as_float(doc.get("gamma_th_db", 5.0), "gamma_th_db")),
        modulation=_parse_modulation(doc.get("modulation")),
        mc_trials=_as_int(doc.get("mc_trials", 1_000_000), "mc_trials"),
        seed=_as_int(doc.get("seed", 1234), "seed"),
        workers=_as_int(doc.get("workers", 0), "workers"),
        output_path=str(doc.get("output_path", "out")),
        link_kwargs=link_kwargs,
        direct_snrs=direct_snrs,
        relay_c=relay_c,
    )


def _parse_documents(path: str | Path) -> list[Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        docs = [d for d in yaml.safe_load_all(text) if d is not None]
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ConfigError(
                f"parse error at line {mark.line + 1}, column {mark.column + 1}: {problem}"
            ) from exc
        raise ConfigError(f"parse error: {problem}") from exc
    if not docs:
        raise ConfigError(f"config {path} holds no documents")
    return docs


def load_config(path: str | Path, *, strict: bool = False) -> SweepConfig:
    """Read, validate and resolve a single-document sweep config."""
    docs = _parse_documents(path)
    if len(docs) != 1:
        raise ConfigError(
            f"expected a single config document, found {len(docs)} "
            f"(run/validate accept multi-document files)"
        )
    return _build_config(docs[0], default_name=Path(path).stem, strict=strict)


def load_config_stream(path: str | Path, *, strict: bool = False) -> list[SweepConfig]:
    """Read every YAML document in the file as an independent sweep config."""
    docs = _parse_documents(path)
    stem = Path(path).stem
    configs = []
    for i, doc in enumerate(docs):
        default = stem if len(docs) == 1 else f"{stem}_{i + 1}"
        configs.append(_build_config(doc, default_name=default, strict=strict))
    return configs


# ---------------------------------------------------------------------------
# sweep orchestration
# ---------------------------------------------------------------------------


def scenario_at(cfg: SweepConfig, x: float) -> Scenario:
    """Scenario for one grid point: the swept quantity replaces its template value."""
    base = cfg.scenario
    if cfg.sweep_axis == "avg_snr_db":
        snr = db_to_linear(x)
        return replace(base, budget=budget_from_avg_snrs(snr, snr, relay_c=cfg.relay_c))
    if cfg.sweep_axis == "tx_power_dbm":
        kwargs = dict(cfg.link_kwargs or {})
        kwargs["tx_power_dbm"] = x
        return replace(base, budget=link_budget(relay_c=cfg.relay_c, **kwargs))
    if cfg.sweep_axis == "rf_distance_m":
        kwargs = dict(cfg.link_kwargs or {})
        kwargs["rf_distance_m"] = x
        return replace(base, budget=link_budget(relay_c=cfg.relay_c, **kwargs))
    n = int(round(x))
    return Scenario.uniform(
        n, base.rf_branches[0], base.thz_fading, base.pointing, base.budget
    )


class _PointJob(NamedTuple):
    index: int
    x: float
    scenario: Scenario | None
    scenario_error: str
    metrics: tuple[str, ...]
    gamma_th: float
    modulation: ModulationParams
    mc_trials: int
    seed: int


def _tag(side: str, exc: BaseException) -> str:
    text = f"{side}:{type(exc).__name__}: {exc}"
    return text.replace(",", ";").replace("\n", " ")[:200]


def _pdf_estimate(samples: np.ndarray, at: float) -> tuple[float, float]:
    # Central-window density estimate at the threshold; the O(h^2) smoothing
    # bias at h = 5% is far below the binomial noise at <= 1e7 trials.
    h = 0.05
    lo, hi = at * (1.0 - h), at * (1.0 + h)
    frac = np.count_nonzero((samples > lo) & (samples <= hi)) / len(samples)
    width = hi - lo
    return frac / width, math.sqrt(frac * (1.0 - frac) / len(samples)) / width


def _point_rows(job: _PointJob) -> tuple[int, list[Row]]:
    nan = math.nan
    if job.scenario is None:
        return job.index, [
            Row(job.x, m, nan, nan, nan, nan, job.scenario_error) for m in job.metrics
        ]
    batch = None
    metrics_mc = None
    mc_tag = ""
    if job.mc_trials > 0:
        try:
            batch = simulate(job.scenario, job.mc_trials, job.seed)
            metrics_mc = empirical_metrics(batch, job.gamma_th, job.modulation)
        except Exception as exc:
            batch, metrics_mc, mc_tag = None, None, _tag("mc", exc)
    rows = []
    for metric in job.metrics:
        try:
            point = evaluate_metric(
                metric,
                job.scenario,
                gamma_th=job.gamma_th,
                modulation=job.modulation,
                independent_var=job.x,
            )
            analytic, analytic_err, analytic_tag = point.value, point.est_abs_error, ""
        except Exception as exc:
            analytic, analytic_err, analytic_tag = nan, nan, _tag("analytic", exc)
        mc_value = mc_stderr = nan
        if metrics_mc is not None:
            if metric == "outage":
                mc_value, mc_stderr = metrics_mc.outage, metrics_mc.outage_stderr
            elif metric == "ber":
                mc_value, mc_stderr = metrics_mc.ber, metrics_mc.ber_stderr
            elif metric == "capacity":
                mc_value, mc_stderr = metrics_mc.capacity, metrics_mc.capacity_stderr
            else:
                mc_value, mc_stderr = _pdf_estimate(batch.end_to_end, job.gamma_th)
        tags = "|".join(t for t in (analytic_tag, mc_tag) if t)
        rows.append(Row(job.x, metric, analytic, analytic_err, mc_value, mc_stderr, tags))
    return job.index, rows


def _fmt(value: float) -> str:
    return "nan" if math.isnan(value) else format(value, ".12g")


def header_lines(cfg: SweepConfig, *, timestamp: bool = True) -> tuple[str, ...]:
    """'#'-prefixed metadata block: resolved config, derived SNRs, matched EGC."""
    lines = ["# thzrelay sweep artifact"]
    if timestamp:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        lines.append(f"# generated: {stamp} (excluded from reproducibility comparison)")
    lines += [
        f"# version: {__version__}",
        f"# name: {cfg.name}",
        f"# sweep.axis: {cfg.sweep_axis}",
        "# sweep.grid: " + " ".join(_fmt(x) for x in cfg.grid),
        f"# metrics: {' '.join(cfg.metrics)}",
        f"# gamma_th_db: {_fmt(linear_to_db(cfg.gamma_th))}",
        f"# modulation: {cfg.modulation.name or 'custom'}"
        f" (p={_fmt(cfg.modulation.p)} q={_fmt(cfg.modulation.q)})",
        f"# mc_trials: {cfg.mc_trials}",
        f"# seed: {cfg.seed} (grid point i simulates with seed + i)",
        f"# output_path: {cfg.output_path}",
        f"# scenario.n_antennas: {cfg.scenario.n_antennas}",
    ]
    for label, fading in (
        ("rf_fading", cfg.scenario.rf_branches[0]),
        ("thz_fading", cfg.scenario.thz_fading),
    ):
        lines.append(
            f"# scenario.{label}: alpha={_fmt(fading.alpha)} mu={_fmt(fading.mu)}"
            f" omega={_fmt(fading.omega)}"
        )
    pointing = cfg.scenario.pointing
    lines.append(
        f"# scenario.pointing: phi={_fmt(pointing.phi)} s0={_fmt(pointing.s0)}"
    )
    if cfg.relay_c is None:
        lines.append("# scenario.relay_c: semi-blind (1 + E[combined SNR], per point)")
    else:
        lines.append(f"# scenario.relay_c: {_fmt(cfg.relay_c)}")
    if cfg.link_kwargs is not None:
        for key in sorted(cfg.link_kwargs):
            lines.append(f"# budget.{key}: {_fmt(cfg.link_kwargs[key])}")
    if cfg.direct_snrs is not None:
        lines.append(f"# scenario.avg_snr_rf_db: {_fmt(linear_to_db(cfg.direct_snrs[0]))}")
        lines.append(f"# scenario.avg_snr_thz_db: {_fmt(linear_to_db(cfg.direct_snrs[1]))}")

    link = compile_link(cfg.scenario)
    lines += [
        f"# derived.avg_snr_rf_db: {_fmt(linear_to_db(cfg.scenario.avg_snr_rf))}",
        f"# derived.avg_snr_thz_db: {_fmt(linear_to_db(cfg.scenario.avg_snr_thz))}",
        f"# derived.relay_c: {_fmt(cfg.scenario.relay_constant)}",
        f"# derived.egc_matched: alpha={_fmt(link.rf.alpha)} mu={_fmt(link.rf.mu)}"
        f" omega={_fmt(link.rf.omega)} residual={_fmt(link.moment_residual)}",
        f"# note: derived values hold at the baseline template; the sweep axis"
        f" ({cfg.sweep_axis}) overrides its quantity per point",
        "# columns: x, metric, analytic, analytic_err, mc, mc_stderr, error",
    ]
    return tuple(lines)


def _write_csv(path: Path, header: tuple[str, ...], rows: list[Row]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write("x,metric,analytic,analytic_err,mc,mc_stderr,error\n")
        for r in rows:
            fh.write(
                f"{_fmt(r.x)},{r.metric},{_fmt(r.analytic)},{_fmt(r.analytic_err)},"
                f"{_fmt(r.mc)},{_fmt(r.mc_stderr)},{r.error}\n"
            )
    os.replace(tmp, path)


def run_sweep(cfg: SweepConfig, out_dir: str | Path | None = None) -> CurveArtifact:
    """Evaluate every (grid point, metric) pair and write one CSV per metric.

    Grid points are independent jobs (worker count from the config, 0 = all
    CPUs); rows come back to the single writer in grid order, so artifacts
    are deterministic regardless of parallelism.
    """
    jobs = []
    for i, x in enumerate(cfg.grid):
        try:
            scenario, tag = scenario_at(cfg, x), ""
        except Exception as exc:
            scenario, tag = None, _tag("scenario", exc)
        jobs.append(
            _PointJob(
                i, x, scenario, tag, cfg.metrics, cfg.gamma_th,
                cfg.modulation, cfg.mc_trials, cfg.seed + i,
            )
        )

    workers = cfg.workers or os.cpu_count() or 1
    results: list[list[Row] | None] = [None] * len(jobs)
    started = time.perf_counter()
    if workers == 1 or len(jobs) == 1:
        outcomes = map(_point_rows, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=min(workers, len(jobs)))
        outcomes = pool.map(_point_rows, jobs)
    for index, rows in outcomes:
        results[index] = rows
        logger.info(
            "%s %s=%g: %s",
            cfg.name,
            cfg.sweep_axis,
            rows[0].x,
            " ".join(
                f"{r.metric}={_fmt(r.analytic)}" + (f" [{r.error}]" if r.error else "")
                for r in rows
            ),
        )
    if workers > 1 and len(jobs) > 1:
        pool.shutdown()
    logger.info("%s: %d point(s) in %.1fs", cfg.name, len(jobs), time.perf_counter() - started)

    all_rows = [row for rows in results for row in (rows or [])]
    n_failures = sum(1 for row in all_rows if row.error)
    header = header_lines(cfg)

    target = Path(out_dir) if out_dir is not None else Path(cfg.output_path)
    target.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric in cfg.metrics:
        path = target / f"{cfg.name}_{metric}.csv"
        _write_csv(path, header, [r for r in all_rows if r.metric == metric])
        paths.append(path)
    return CurveArtifact(header, tuple(all_rows), tuple(paths), n_failures)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

_COMMON_BUDGET = """\
  budget:
    tx_power_dbm: 10.0
    rf_distance_m: 75.0
    rf_freq_hz: 6.0e+9
    rf_antenna_gain_dbi: 52.0
    rf_bandwidth_hz: 2.0e+7
    rf_noise_figure_db: 5.0
    thz_distance_m: 50.0
    thz_freq_hz: 2.75e+11
    thz_antenna_gain_dbi: 110.0
    thz_bandwidth_hz: 1.0e+10
    thz_noise_figure_db: 5.0
    thz_absorption_per_m: 2.8e-4
"""

_SNR_GRID = "[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0]"

_FIG2A_DOC = """\
name: fig2a_n{n}
scenario:
  n_antennas: {n}
  rf_fading: {{alpha: 1.0, mu: 1.0}}
  thz_fading: {{alpha: 2.0, mu: 2.6}}
  pointing: {{phi: 4.0, s0: 1.0}}
{budget}\
sweep:
  axis: avg_snr_db
  grid: {grid}
metrics: [outage]
gamma_th_db: 5.0
mc_trials: 1000000
seed: 20260815
output_path: out
"""

_PRESET_FIG2A = (
    """\
# Outage probability of the demo layout versus per-hop average SNR, for
# 1/3/5-branch equal-gain receive arrays (three documents, one per array).
# Layout: RF hop 6 GHz over 75 m with 52 dBi combined gain and 20 MHz of
# bandwidth; THz hop 275 GHz over 50 m with 110 dBi combined gain, 10 GHz
# of bandwidth and 2.8e-4 /m molecular absorption.  RF branches alpha = 1,
# mu = 1 (terminal slope 0.5 per branch); THz hop alpha = 2, mu = 2.6;
# beam jitter phi = 4 (0.15 m jitter on a 0.6 m beam), so the slope
# saturates at phi/2 = 2 once the array is large enough.
# The budget block fixes the baseline SNRs echoed in the artifact header;
# the sweep axis then sets both hop average SNRs to the grid value.
# Outage threshold 5 dB; semi-blind relay gain C = 1 + E[combined SNR].
"""
    + _FIG2A_DOC.format(n=1, budget=_COMMON_BUDGET, grid=_SNR_GRID)
    + "---\n"
    + _FIG2A_DOC.format(n=3, budget=_COMMON_BUDGET, grid=_SNR_GRID)
    + "---\n"
    + _FIG2A_DOC.format(n=5, budget=_COMMON_BUDGET, grid=_SNR_GRID)
)

_PRESET_FIG2B = (
    """\
# Average DBPSK bit error rate of the demo layout versus per-hop average
# SNR with a two-branch equal-gain array.  RF branches alpha = 2,
# mu = 1.2; THz hop alpha = 2, mu = 2.6; steadier beam, phi = 14.0625
# (0.08 m jitter on a 0.6 m beam).  Same link budget and axis convention
# as the fig2a preset.
name: fig2b_n2
scenario:
  n_antennas: 2
  rf_fading: {alpha: 2.0, mu: 1.2}
  thz_fading: {alpha: 2.0, mu: 2.6}
  pointing: {phi: 14.0625, s0: 1.0}
"""
    + _COMMON_BUDGET
    + f"""\
sweep:
  axis: avg_snr_db
  grid: {_SNR_GRID}
metrics: [ber]
gamma_th_db: 5.0
modulation: dbpsk
mc_trials: 1000000
seed: 20260815
output_path: out
"""
)

_FIG2C_DOC = """\
name: fig2c_{p}dbm
scenario:
  n_antennas: 1
  rf_fading: {{alpha: 1.5, mu: 1.5}}
  thz_fading: {{alpha: 1.5, mu: 1.5}}
  pointing: {{phi: 36.0, s0: 1.0}}
  relay_c: 7.0e+6
  budget:
    tx_power_dbm: {p}.0
    rf_distance_m: 75.0
    rf_freq_hz: 6.0e+9
    rf_antenna_gain_dbi: 52.0
    rf_bandwidth_hz: 2.0e+7
    rf_noise_figure_db: 5.0
    thz_distance_m: 50.0
    thz_freq_hz: 2.75e+11
    thz_antenna_gain_dbi: 110.0
    thz_bandwidth_hz: 1.0e+10
    thz_noise_figure_db: 5.0
    thz_absorption_per_m: 2.8e-4
sweep:
  axis: rf_distance_m
  grid: [50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0, 85.0, 90.0, 95.0, 100.0]
metrics: [capacity]
gamma_th_db: 5.0
mc_trials: 1000000
seed: 20260815
output_path: out
"""

_PRESET_FIG2C = (
    """\
# Ergodic capacity versus RF-hop distance at 10 and 20 dBm transmit power
# (two documents).  Fading alpha = mu = 1.5 on both hops; steady beam,
# phi = 36 (0.05 m jitter on a 0.6 m beam); THz hop fixed at 50 m.
# The relay gain constant is a design-time fixed value (7.0e6, not rescaled
# with transmit power), chosen so the two power levels sit 4 bit/s/Hz
# apart; because C is fixed, the two distance curves are exactly parallel.
"""
    + _FIG2C_DOC.format(p=10)
    + "---\n"
    + _FIG2C_DOC.format(p=20)
)

_PRESETS = {"fig2a": _PRESET_FIG2A, "fig2b": _PRESET_FIG2B, "fig2c": _PRESET_FIG2C}


def preset_text(name: str) -> str:
    """Replication config for one of the bundled curve families."""
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r} (choose from {', '.join(sorted(_PRESETS))})"
        ) from None


# ---------------------------------------------------------------------------
# command line entry points
# ---------------------------------------------------------------------------


def _apply_overrides(cfg: SweepConfig, args: argparse.Namespace) -> SweepConfig:
    updates: dict[str, Any] = {}
    if args.no_mc:
        updates["mc_trials"] = 0
    elif args.trials is not None:
        updates["mc_trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args: argparse.Namespace) -> int:
    exit_code = 0
    for cfg in load_config_stream(args.config, strict=args.strict):
        cfg = _apply_overrides(cfg, args)
        artifact = run_sweep(cfg, out_dir=args.out)
        for path in artifact.paths:
            print(path)
        if artifact.n_failures:
            logger.warning("%s: %d row(s) failed", cfg.name, artifact.n_failures)
            exit_code = 2
    return exit_code


def _cmd_validate(args: argparse.Namespace) -> int:
    for cfg in load_config_stream(args.config, strict=args.strict):
        for line in header_lines(cfg, timestamp=False):
            print(line)
        print(
            f"# ok: {len(cfg.grid)} point(s) x {len(cfg.metrics)} metric(s), "
            f"mc {'enabled' if cfg.mc_enabled else 'disabled'}"
        )
    return 0


def _cmd_presets(args: argparse.Namespace) -> int:
    text = preset_text(args.name)
    if args.out is not None:
        target = Path(args.out)
        target.mkdir(parents=True, exist_ok=True)
        path = target / f"{args.name}.yaml"
        path.write_text(text)
        print(path)
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="thzrelay",
        description="Dual-hop RF/THz relay link sweeps: analytics vs Monte Carlo.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="evaluate a sweep config and write CSV artifacts")
    run_p.add_argument("config", help="YAML sweep config (may hold several documents)")
    run_p.add_argument("--out", help="artifact directory (overrides output_path)")
    run_p.add_argument("--trials", type=int, help="override mc_trials")
    run_p.add_argument("--seed", type=int, help="override the Monte Carlo base seed")
    run_p.add_argument("--workers", type=int, help="override the worker count")
    run_p.add_argument("--no-mc", action="store_true", help="disable the simulator")
    run_p.add_argument("--strict", action="store_true",
                       help="treat unknown config keys as errors")

    val_p = sub.add_parser("validate", help="check a config and echo the resolved values")
    val_p.add_argument("config")
    val_p.add_argument("--strict", action="store_true",
                       help="treat unknown config keys as errors")

    pre_p = sub.add_parser("presets", help="emit a bundled replication config")
    pre_p.add_argument("name", help="fig2a | fig2b | fig2c")
    pre_p.add_argument("--out", help="write <name>.yaml here instead of stdout")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_presets(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
