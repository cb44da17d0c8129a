"""Declarative scenario runs: config parsing, evaluation and data output."""
from __future__ import annotations

import configparser
import dataclasses
import enum
import io
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cat_dynamics import CatStateSpec, CoherenceModel, normalization
from .propagator import SystemParams, revival_half_period
from .qubit_witness import Target, find_optimal_time, scan_grid, witness_series

__all__ = [
    "ConfigError",
    "WitnessKind",
    "OutputFormat",
    "ScenarioConfig",
    "RunReport",
    "ScenarioResult",
    "CSV_HEADER",
    "SWEEP_AXES",
    "default_window",
    "load_config",
    "parse_config",
    "evaluate_scenario",
    "write_data",
    "run_scenario",
    "run_sweep",
]

CSV_HEADER = "t,E_GHZ,E_W,n_c,kappa_abs,fidelity_sq"
SWEEP_AXES = ("delta", "gamma_c", "gamma_e", "alpha")
DEFAULT_HALF_PERIODS = 3
SEARCH_POINTS_PER_PERIOD = 40


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


class WitnessKind(str, enum.Enum):
    GHZ = "ghz"
    W = "w"
    BOTH = "both"

    @property
    def targets(self) -> tuple[Target, ...]:
        if self is WitnessKind.BOTH:
            return (Target.GHZ, Target.W)
        return (Target(self.value),)


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"


def default_window(params: SystemParams) -> tuple[float, float]:
    """``[0, 3 T/2]`` with ``T/2`` the revival half period: three revivals."""
    return 0.0, DEFAULT_HALF_PERIODS * revival_half_period(params)


@dataclass(frozen=True)
class ScenarioConfig:
    params: SystemParams = field(default_factory=SystemParams)
    cat: CatStateSpec = field(default_factory=lambda: CatStateSpec.symmetric(2.0))
    witness_kind: WitnessKind = WitnessKind.GHZ
    dissipative: bool = False
    coherence_model: CoherenceModel = CoherenceModel.DILATION_CONSISTENT
    t_start: float = 0.0
    t_end: float | None = None
    n_points: int = 2001
    refine_optimum: bool = True
    output_path: str | None = None
    output_format: OutputFormat = OutputFormat.CSV

    def __post_init__(self):
        if self.t_end is not None and not self.t_start < self.t_end:
            raise ConfigError("t_end", f"must exceed t_start ({self.t_start} >= {self.t_end})")
        if self.t_start < 0:
            raise ConfigError("t_start", "must be non-negative")
        if self.n_points < 2:
            raise ConfigError("n_points", "must be at least 2")

    def window(self) -> tuple[float, float]:
        if self.t_end is not None:
            return self.t_start, self.t_end
        _, end = default_window(self.params)
        return self.t_start, self.t_start + end

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def resolved(self) -> dict:
        """Flat, fully resolved field listing used for config echo."""
        t0, t1 = self.window()
        out = {f"params.{k}": v for k, v in dataclasses.asdict(self.params).items()}
        out.update(
            {
                "cat.alpha1": _format_complex(self.cat.alpha1),
                "cat.alpha2": _format_complex(self.cat.alpha2),
                "cat.theta": self.cat.theta,
                "run.witness_kind": self.witness_kind.value,
                "run.dissipative": self.dissipative,
                "run.coherence_model": self.coherence_model.value,
                "run.t_start": t0,
                "run.t_end": t1,
                "run.n_points": self.n_points,
                "run.refine_optimum": self.refine_optimum,
                "run.output_format": self.output_format.value,
            }
        )
        return out


def _format_complex(z) -> str:
    z = complex(z)
    return repr(z.real) if z.imag == 0 else repr(z)


_PI_RE = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def _parse_angle(text: str) -> float:
    m = _PI_RE.match(text)
    if m:
        coef = m.group(1)
        value = {"": 1.0, "+": 1.0, "-": -1.0}.get(coef)
        value = float(coef) if value is None else value
        return value * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    return float(text)


def _get(section, name, convert, default, section_name):
    if section is None or name not in section:
        return default
    raw = section[name].strip()
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section_name}.{name}", f"cannot parse {raw!r} ({exc})") from None


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _parse_optional_float(text: str):
    return None if text.lower() in ("", "auto", "none") else float(text)


_KNOWN = {
    "params": {"omega_c", "delta", "g", "c_hop", "gamma_c", "gamma_e"},
    "cat": {"alpha1", "alpha2", "alpha", "theta"},
    "run": {
        "witness_kind", "dissipative", "coherence_model", "t_start", "t_end", "n_points",
        "refine_optimum", "output_path", "output_format",
    },
}  # fmt: skip


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from INI text with ``[params]``, ``[cat]``, ``[run]``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from None
    for name in cp.sections():
        if name not in _KNOWN:
            raise ConfigError(name, "unknown section")
        for key in cp[name]:
            if key not in _KNOWN[name]:
                raise ConfigError(f"{name}.{key}", "unknown field")
    p = cp["params"] if cp.has_section("params") else None
    c = cp["cat"] if cp.has_section("cat") else None
    r = cp["run"] if cp.has_section("run") else None
    base = SystemParams()
    values = {}
    for name in _KNOWN["params"]:
        values[name] = _get(p, name, float, getattr(base, name), "params")
    try:
        params = SystemParams(**values)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None

    alpha = _get(c, "alpha", complex, None, "cat")
    a1 = _get(c, "alpha1", complex, alpha if alpha is not None else 2.0, "cat")
    a2 = _get(c, "alpha2", complex, -alpha if alpha is not None else -a1, "cat")
    theta = _get(c, "theta", _parse_angle, 0.0, "cat")
    cat = CatStateSpec(a1, a2, theta)

    def enum_of(kind):
        return lambda s: kind(s.lower())

    try:
        return ScenarioConfig(
            params=params,
            cat=cat,
            witness_kind=_get(r, "witness_kind", enum_of(WitnessKind), WitnessKind.GHZ, "run"),
            dissipative=_get(r, "dissipative", _parse_bool, False, "run"),
            coherence_model=_get(
                r, "coherence_model", enum_of(CoherenceModel), CoherenceModel.DILATION_CONSISTENT, "run"
            ),
            t_start=_get(r, "t_start", float, 0.0, "run"),
            t_end=_get(r, "t_end", _parse_optional_float, None, "run"),
            n_points=_get(r, "n_points", int, 2001, "run"),
            refine_optimum=_get(r, "refine_optimum", _parse_bool, True, "run"),
            output_path=_get(r, "output_path", str, None, "run"),
            output_format=_get(r, "output_format", enum_of(OutputFormat), OutputFormat.CSV, "run"),
        )
    except ConfigError:
        raise


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


@dataclass
class RunReport:
    """Summary of one scenario run.

    ``optima`` maps each evaluated witness kind to ``(t_star, witness_min)``;
    ``t_star``/``witness_min`` refer to the first kind.
    """

    t_star: float
    witness_min: float
    max_photon_number: float
    optima: dict
    config: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "witness_min": self.witness_min,
            "max_photon_number": self.max_photon_number,
            "optima": {k: {"t_star": t, "witness_min": v} for k, (t, v) in self.optima.items()},
            "config": self.config,
            "provenance": self.provenance,
        }


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    report: RunReport
    columns: dict


def evaluate_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Search for the witness optimum on a fine grid and tabulate the output grid.

    The optimum search uses its own grid (at least 40 samples per fastest
    oscillation, refined by golden section); ``n_points`` only sets the
    resolution of the emitted data.
    """
    normalization(config.cat)  # raises DegenerateSuperpositionError early
    t0, t1 = config.window()
    params, cat = config.params, config.cat
    common = dict(dissipative=config.dissipative, model=config.coherence_model)
    search = scan_grid(params, t0, t1, SEARCH_POINTS_PER_PERIOD)
    data_t = np.linspace(t0, t1, config.n_points)

    optima = {}
    columns = {"t": data_t, "E_GHZ": None, "E_W": None}
    max_photons = -np.inf
    fidelity = kappa = photons = None
    for target in config.witness_kind.targets:
        scan = witness_series(params, cat, search, target, **common)
        max_photons = max(max_photons, float(scan.photon_numbers.max()))
        optima[target.value] = find_optimal_time(scan, refine=config.refine_optimum)
        out = witness_series(params, cat, data_t, target, **common)
        columns["E_GHZ" if target is Target.GHZ else "E_W"] = out.values
        if fidelity is None:
            fidelity, kappa, photons = out.fidelity_sq, out.kappa_abs, out.photon_numbers
    max_photons = max(max_photons, float(photons.max()))
    columns.update(n_c=photons, kappa_abs=kappa, fidelity_sq=fidelity)

    first = config.witness_kind.targets[0].value
    report = RunReport(
        t_star=optima[first][0],
        witness_min=optima[first][1],
        max_photon_number=max_photons,
        optima=optima,
        config=config.resolved(),
        provenance={
            "tool": "cavity_ecs",
            "tool_version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
    )
    return ScenarioResult(config, report, columns)


def _fmt(x) -> str:
    return "%.12g" % x


def _echo_lines(config: ScenarioConfig) -> list[str]:
    lines = [f"# cavity_ecs {__version__}"]
    lines += [f"# {k} = {v}" for k, v in config.resolved().items()]
    return lines


def _deterministic_summary(report: RunReport) -> dict:
    return {k: v for k, v in report.to_dict().items() if k not in ("config", "provenance")}


def write_data(result: ScenarioResult, path: str | Path | None, fmt: OutputFormat | None = None) -> str:
    """Serialise the data columns; write to ``path`` (if given) and return the text.

    No timestamps go into data files, so identical configs give identical bytes.
    """
    fmt = OutputFormat(fmt or result.config.output_format)
    cols = result.columns
    names = CSV_HEADER.split(",")
    if fmt is OutputFormat.CSV:
        buf = io.StringIO()
        for line in _echo_lines(result.config):
            buf.write(line + "\n")
        summary = _deterministic_summary(result.report)
        buf.write(f"# t_star = {_fmt(summary['t_star'])}\n")
        buf.write(f"# witness_min = {_fmt(summary['witness_min'])}\n")
        buf.write(f"# max_photon_number = {_fmt(summary['max_photon_number'])}\n")
        buf.write(CSV_HEADER + "\n")
        for i in range(cols["t"].size):
            buf.write(",".join("" if cols[n] is None else _fmt(cols[n][i]) for n in names) + "\n")
        text = buf.getvalue()
    else:
        payload = {
            "tool": "cavity_ecs",
            "tool_version": __version__,
            "config": result.config.resolved(),
            "summary": _deterministic_summary(result.report),
            "columns": names,
            "data": {n: None if cols[n] is None else [float(_fmt(x)) for x in cols[n]] for n in names},
        }
        text = json.dumps(payload, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def run_scenario(
    config: ScenarioConfig, output_path: str | Path | None = None, fmt: OutputFormat | None = None
) -> RunReport:
    """Evaluate ``config`` and write its data file (if a path is known)."""
    result = evaluate_scenario(config)
    path = output_path if output_path is not None else config.output_path
    if path is not None:
        write_data(result, path, fmt)
    return result.report


def _apply_axis(config: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis == "alpha":
        return config.replace(cat=CatStateSpec(complex(value), -complex(value), config.cat.theta))
    try:
        return config.replace(params=config.params.replace(**{axis: float(value)}))
    except ValueError as exc:
        raise ConfigError(f"params.{axis}", str(exc)) from None


def run_sweep(
    base: ScenarioConfig,
    axis: str,
    values,
    output_path: str | Path | None = None,
    fmt: OutputFormat | None = None,
) -> list[RunReport]:
    """One run per value of ``axis``; one summary row per run, in input order.

    ``alpha`` sets ``alpha1 = v`` and ``alpha2 = -v``. Sweeping ``gamma_c`` or
    ``gamma_e`` does not switch on the dissipative dynamics by itself.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    configs = [_apply_axis(base, axis, v) for v in values]
    reports = [evaluate_scenario(c).report for c in configs]
    fmt = OutputFormat(fmt or base.output_format)
    kinds = [t.value for t in base.witness_kind.targets]
    if fmt is OutputFormat.CSV:
        header = [axis] + [f"{k}_{q}" for k in kinds for q in ("t_star", "witness_min")] + ["max_photon_number"]
        lines = _echo_lines(base) + [f"# sweep.axis = {axis}", ",".join(header)]
        for v, rep in zip(values, reports):
            row = [_fmt(float(v))]
            for k in kinds:
                row += [_fmt(rep.optima[k][0]), _fmt(rep.optima[k][1])]
            row.append(_fmt(rep.max_photon_number))
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            {
                "tool": "cavity_ecs",
                "tool_version": __version__,
                "config": base.resolved(),
                "axis": axis,
                "rows": [{"value": float(v), **_deterministic_summary(r)} for v, r in zip(values, reports)],
            },
            indent=2,
        ) + "\n"
    if output_path is not None:
        Path(output_path).write_text(text)
    return reports
