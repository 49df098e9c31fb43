"""Experiment configuration files.

The format is INI-style ``key = value`` text with one section per group.
Physical quantities use the units of the experiment descriptions: density
in BSs per km^2, the training distance in metres, powers and thresholds in
dB, impairments as kappa amplitudes (their squares are the distortion
variances). Conversion to the library's consistent units (km, linear,
kappa squared) happens once, in :meth:`ExperimentSpec.network_config` and
:meth:`ExperimentSpec.impairment_profile`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .channel import ImpairmentProfile, NetworkConfig
from .errors import ConfigError

__all__ = [
    "MODES",
    "SCHEMES",
    "SWEEP_VARIABLES",
    "ExperimentSpec",
    "load_config",
    "parse_config",
    "dump_config",
    "PRESETS",
]

MODES = ("coverage", "rate", "validate", "compare")
SCHEMES = ("custom", "siso", "sdma", "su_bf")
SWEEP_VARIABLES = ("t_db", "fd_ts", "delta", "kappa", "kt_ue", "kr_ue", "kt_bs", "kr_bs")
KAPPA_KEYS = ("kt_ue", "kr_ue", "kt_bs", "kr_bs")


@dataclass(frozen=True)
class NetworkSection:
    lambda_b: float = 0.01  # BSs per km^2
    alpha: float = 3.0
    m_antennas: int = 5
    k_users: int = 3
    p_down_db: float = 15.0
    rho_up_db: float = 5.0
    tau: int = 0  # 0 means tau = k_users
    x_train_m: float = 15.0


@dataclass(frozen=True)
class ImpairmentSection:
    kt_ue: float = 0.0
    kr_ue: float = 0.0
    kt_bs: float = 0.0
    kr_bs: float = 0.0
    fd_ts: float = 0.0
    delta: float = math.nan  # nan means derive from fd_ts


@dataclass(frozen=True)
class ModelSection:
    variance_mode: str = "printed"
    error_shape: str = "k"
    error_variance: str = "aged"
    etx_mode: str = "correlated"
    association: str = "union"


@dataclass(frozen=True)
class McSection:
    n_drops: int = 2000
    seed: int = 0
    fidelity: str = "marks"
    workers: int = 1


@dataclass(frozen=True)
class OutputSection:
    path: str = "-"
    format: str = "csv"


@dataclass(frozen=True)
class ExperimentSection:
    mode: str = "coverage"
    scheme: str = "custom"
    sweep: str = "t_db"
    values: tuple = tuple(float(x) for x in range(-10, 21))
    t_db: float = 0.0  # fixed threshold when the sweep is not over t_db


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    impairments: ImpairmentSection = field(default_factory=ImpairmentSection)
    model: ModelSection = field(default_factory=ModelSection)
    mc: McSection = field(default_factory=McSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- conversions to library types -----------------------------------
    def network_config(self, scheme: str | None = None) -> NetworkConfig:
        net = self.network
        m, k = net.m_antennas, net.k_users
        scheme = scheme or self.experiment.scheme
        if scheme == "siso":
            m, k = 1, 1
        elif scheme == "sdma":
            k = m
        elif scheme == "su_bf":
            k = 1
        return NetworkConfig(
            lambda_b=net.lambda_b,
            alpha=net.alpha,
            m_antennas=m,
            k_users=k,
            p_down=10 ** (net.p_down_db / 10),
            rho_up=10 ** (net.rho_up_db / 10),
            tau=net.tau if net.tau > 0 and scheme == "custom" else k,
            x_train=net.x_train_m / 1000.0,
        )

    def impairment_profile(self, **overrides) -> ImpairmentProfile:
        """Profile with optional overrides of sweepable values."""
        imp = asdict(self.impairments)
        if "kappa" in overrides:
            value = overrides.pop("kappa")
            for key in KAPPA_KEYS:
                imp[key] = value
        imp.update(overrides)
        delta = None if math.isnan(imp["delta"]) else imp["delta"]
        return ImpairmentProfile.from_kappas(
            kt_ue=imp["kt_ue"], kr_ue=imp["kr_ue"], kt_bs=imp["kt_bs"],
            kr_bs=imp["kr_bs"], fd_ts=imp["fd_ts"], delta=delta,
        )

    @property
    def rederived(self) -> bool:
        return self.model.variance_mode == "rederived"

    def with_overrides(self, section: str, **values) -> "ExperimentSpec":
        spec = replace(self, **{section: replace(getattr(self, section), **values)})
        spec.validate()
        return spec

    # -- validation ---------------------------------------------------------
    def validate(self) -> None:
        ex = self.experiment
        _choice("experiment.mode", ex.mode, MODES)
        _choice("experiment.scheme", ex.scheme, SCHEMES)
        _choice("experiment.sweep", ex.sweep, SWEEP_VARIABLES)
        if len(ex.values) == 0:
            raise ConfigError("experiment.values: at least one sweep value required")
        if any(b <= a for a, b in zip(ex.values, ex.values[1:])):
            raise ConfigError("experiment.values: sweep values must be strictly increasing")
        if ex.mode == "rate" and ex.sweep == "t_db":
            raise ConfigError("experiment.sweep: rate mode cannot sweep t_db")
        if ex.mode == "compare" and ex.scheme != "custom":
            raise ConfigError("experiment.scheme: compare mode runs every scheme itself")
        _choice("model.variance_mode", self.model.variance_mode, ("printed", "rederived"))
        _choice("model.error_shape", self.model.error_shape, ("k", "delta"))
        _choice("model.error_variance", self.model.error_variance, ("aged", "contamination"))
        _choice("model.etx_mode", self.model.etx_mode, ("correlated", "independent"))
        _choice("model.association", self.model.association, ("union", "nearest", "max_sir"))
        _choice("mc.fidelity", self.mc.fidelity, ("full", "marks"))
        _choice("output.format", self.output.format, ("csv", "json"))
        if self.mc.n_drops != 0 and self.mc.n_drops < 100:
            raise ConfigError("mc.n_drops must be 0 (analytic only) or at least 100")
        for key in KAPPA_KEYS:
            value = getattr(self.impairments, key)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"impairments.{key}: kappa amplitude must be finite and nonnegative")
        if ex.sweep in KAPPA_KEYS + ("kappa",) and min(ex.values) < 0:
            raise ConfigError("experiment.values: kappa amplitudes must be nonnegative")
        if self.mc.workers < 1:
            raise ConfigError("mc.workers must be at least 1")
        if not 0 <= self.mc.seed < 2**64:
            raise ConfigError("mc.seed must be an unsigned 64-bit integer")
        try:
            schemes = ("siso", "sdma", "su_bf") if ex.mode == "compare" else (ex.scheme,)
            for scheme in schemes:
                self.network_config(scheme)
            self.impairment_profile()
        except ConfigError as exc:
            raise ConfigError(f"{_section_of(str(exc))}: {exc}") from None
        if ex.sweep in SWEEP_VARIABLES[1:]:
            for v in ex.values:
                try:
                    self.impairment_profile(**{ex.sweep: v})
                except ConfigError as exc:
                    raise ConfigError(f"experiment.values: {exc}") from None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            section = asdict(getattr(self, f.name))
            out[f.name] = {
                k: (list(v) if isinstance(v, tuple) else v) for k, v in section.items()
            }
        return out


def _section_of(message: str) -> str:
    for key in ("alpha", "lambda_b", "x_train", "m_antennas", "k_users", "tau", "p_down", "rho_up"):
        if key in message:
            return f"network.{key}"
    if "K ≤ M" in message:
        return "network.k_users"
    for key in ("kt_ue", "kr_ue", "kt_bs", "kr_bs", "fd_ts", "delta"):
        if key in message:
            return f"impairments.{key}"
    return "config"


def _choice(key, value, allowed):
    if value not in allowed:
        raise ConfigError(f"{key}: {value!r} is not one of {', '.join(allowed)}")


_SECTIONS = {
    "experiment": ExperimentSection,
    "network": NetworkSection,
    "impairments": ImpairmentSection,
    "model": ModelSection,
    "mc": McSection,
    "output": OutputSection,
}


def _parse_values(text: str) -> tuple:
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError("range must be start:stop:step with a positive step")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(x) for x in np.round(start + step * np.arange(n), 12))
    return tuple(float(p) for p in text.replace(",", " ").split())


def _convert(cls, key, raw):
    ftype = {f.name: f for f in fields(cls)}[key]
    default = ftype.default
    if key == "values":
        return _parse_values(raw)
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw) if raw.strip() else math.nan
    return raw.strip()


def parse_config(text: str) -> ExperimentSpec:
    """Parse configuration text; unknown sections or keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: cannot parse ({exc})") from None
    sections = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{name}: unknown section")
        cls = _SECTIONS[name]
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"{name}.{key}: unknown key")
            try:
                values[key] = _convert(cls, key, raw)
            except ValueError as exc:
                raise ConfigError(f"{name}.{key}: invalid value {raw!r} ({exc})") from None
        sections[name] = cls(**values)
    spec = ExperimentSpec(**sections)
    spec.validate()
    return spec


def load_config(path) -> ExperimentSpec:
    """Read and validate a configuration file; defaults fill missing keys."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from None
    return parse_config(text)


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def dump_config(spec: ExperimentSpec) -> str:
    """Serialize a spec; ``parse_config(dump_config(s)) == s``."""
    lines = []
    for name in _SECTIONS:
        lines.append(f"[{name}]")
        for key, value in asdict(getattr(spec, name)).items():
            lines.append(f"{key} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)


PRESETS = {
    # M=5, K=3, alpha=3, training distance 15 m, ideal hardware, static users
    "baseline": "",
    "fig5-uplink": """
[impairments]
kt_ue = 0.08
kr_bs = 0.0
""",
    "fig2-downlink": """
[impairments]
kt_bs = 0.15
""",
    "fig1-rate": """
[experiment]
mode = rate
sweep = kappa
values = 0.0, 0.04, 0.08, 0.15
""",
    "fig3-coverage-doppler": """
[experiment]
sweep = fd_ts
values = 0.0, 0.1, 0.2, 0.3, 0.36, 0.45
t_db = 0
""",
    "fig4-rate-doppler": """
[experiment]
mode = rate
sweep = fd_ts
values = 0.0, 0.1, 0.2, 0.3, 0.36, 0.45
""",
    "fig6-compare": """
[experiment]
mode = compare
[impairments]
kt_ue = 0.03
kr_ue = 0.03
kt_bs = 0.08
kr_bs = 0.08
delta = 0.1
""",
}
