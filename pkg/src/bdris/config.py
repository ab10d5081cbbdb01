"""Experiment configuration: INI parsing, defaults and cross-field validation.

Every dB / dBm quantity is stored in dB in the file and converted to linear
scale only through :meth:`ExperimentConfig.noise_power_w` and
:func:`dbm_to_watt`.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, PathLossModel, Scenario, noise_power_dbm
from .geometry import ArrayGeometry, build_geometry, wavelength_from_frequency
from .precoder import PrecodingCase
from .ris_config import Architecture, GroupingStrategy


class ConfigError(ValueError):
    """Aggregated configuration problems, one ``field.path: message`` per entry."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def dbm_to_watt(value_dbm):
    return 10.0 ** ((np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)


def parse_grid(text: str) -> list[float]:
    """``"a:step:b"`` (inclusive), comma list, or a single number."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"range must be start:step:stop, got {text!r}")
        start, step, stop = parts
        if step <= 0 or stop < start:
            raise ValueError(f"empty or descending range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


@dataclass(frozen=True)
class ArchSpec:
    architecture: Architecture
    group_count: int = 1
    strategy: GroupingStrategy = GroupingStrategy.LINEAR
    base: GroupingStrategy = GroupingStrategy.LINEAR

    @property
    def label(self) -> str:
        if self.architecture is Architecture.ACTIVE:
            return "active"
        if self.architecture is Architecture.DRIS:
            return "dris"
        if self.group_count == 1:
            return "bd"
        tag = f"bd_g{self.group_count}_{self.strategy.value}"
        if self.strategy is GroupingStrategy.MIRROR_SYMMETRIC:
            tag += f"_{self.base.value}"
        return tag


def parse_arch(token: str, default_g: int = 1,
               default_strategy: GroupingStrategy = GroupingStrategy.LINEAR,
               default_base: GroupingStrategy = GroupingStrategy.LINEAR) -> ArchSpec:
    """``active``, ``dris``, ``bd`` or ``bd:G[:strategy[:base]]``."""
    parts = [p.strip().lower() for p in token.split(":")]
    name = parts[0]
    if name == "active":
        return ArchSpec(Architecture.ACTIVE)
    if name in ("dris", "d-ris"):
        return ArchSpec(Architecture.DRIS)
    if name not in ("bd", "bd-ris"):
        raise ValueError(f"unknown architecture {token!r}")
    G = int(parts[1]) if len(parts) > 1 else default_g
    strategy = GroupingStrategy(parts[2]) if len(parts) > 2 else default_strategy
    base = GroupingStrategy(parts[3]) if len(parts) > 3 else default_base
    arch = Architecture.BD_FULL if G == 1 else Architecture.BD_GROUP
    return ArchSpec(arch, G, strategy, base)


@dataclass(frozen=True)
class GeometryConfig:
    carrier_ghz: float = 28.0
    m_x: int = 10
    m_y: int = 10
    spacing_wavelengths: float = 0.5
    separation_wavelengths: float = 0.5
    element_area_wavelengths2: float | None = None  # None -> dx*dy

    @property
    def wavelength(self) -> float:
        return wavelength_from_frequency(self.carrier_ghz * 1e9)

    def build(self, m_x=None, m_y=None, separation_wavelengths=None) -> ArrayGeometry:
        lam = self.wavelength
        d = self.spacing_wavelengths * lam
        area = (d * d if self.element_area_wavelengths2 is None
                else self.element_area_wavelengths2 * lam ** 2)
        sep = self.separation_wavelengths if separation_wavelengths is None else separation_wavelengths
        return build_geometry(m_x or self.m_x, m_y or self.m_y, d, d, sep * lam, lam, area)


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    scenario: Scenario = Scenario.LOS_PRESENT
    case: PrecodingCase = PrecodingCase.CASE3_PARTIAL
    codebook_step_deg: float = 5.0
    architectures: tuple[ArchSpec, ...] = (ArchSpec(Architecture.ACTIVE),
                                           ArchSpec(Architecture.DRIS),
                                           ArchSpec(Architecture.BD_FULL))
    group_count: int = 1
    grouping: GroupingStrategy = GroupingStrategy.LINEAR
    grouping_base: GroupingStrategy = GroupingStrategy.LINEAR
    bandwidth_mhz: float = 100.0
    noise_psd_dbm_hz: float = -174.0
    power_dbm: tuple[float, ...] = (20.0,)
    rate_power_dbm: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    aber_power_dbm: tuple[float, ...] = tuple(float(p) for p in range(-10, 31, 5))
    modulation_order: int = 2
    trials: int = 10_000
    aber_trials: int = 10_000
    aber_symbols_per_trial: int = 4_000
    seed: int = 0
    threads: int = 1
    sweep_axis: str = "array_size"
    sweep_values: tuple[float, ...] = ()
    cluster_counts: tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    include_rayleigh: bool = True
    pattern_resolution_deg: float = 0.5
    pattern_cut_deg: float = 1.0
    pattern_normalization: str = "sphere"
    pattern_azimuth_deg: float = 0.0
    pattern_elevation_deg: float = 0.0
    complexity_groups: tuple[int, ...] = ()  # empty: every divisor of M

    @property
    def noise_dbm(self) -> float:
        return noise_power_dbm(self.noise_psd_dbm_hz, self.bandwidth_mhz * 1e6)

    @property
    def noise_power_w(self) -> float:
        return float(dbm_to_watt(self.noise_dbm))

    def build_geometry(self) -> ArrayGeometry:
        return self.geometry.build()

    def complexity_group_counts(self) -> tuple[int, ...]:
        M = self.geometry.m_x * self.geometry.m_y
        if self.complexity_groups:
            return self.complexity_groups
        return tuple(G for G in range(1, M + 1) if M % G == 0)


SECTIONS = ("geometry", "channel", "link", "precoder", "ris", "eval", "sweep",
            "snr_gain", "pattern", "complexity")


def _parse(cp: configparser.ConfigParser):
    problems: list[str] = []
    kw: dict = {}
    geo_kw: dict = {}
    ch_kw: dict = {}
    pl_kw: dict = {}

    for section in cp.sections():
        if section not in SECTIONS:
            problems.append(f"{section}: unknown section")

    def get(section, key, conv, target, name=None):
        if cp.has_option(section, key):
            raw = cp.get(section, key)
            try:
                target[name or key] = conv(raw)
            except (ValueError, TypeError) as exc:
                problems.append(f"{section}.{key}: {exc}")

    def as_int(s):
        v = float(s)
        if v != int(v):
            raise ValueError(f"expected an integer, got {s!r}")
        return int(v)

    def as_bool(s):
        low = s.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {s!r}")

    grid = lambda s: tuple(parse_grid(s))
    int_grid = lambda s: tuple(as_int(str(v)) for v in parse_grid(s))

    get("geometry", "carrier_ghz", float, geo_kw)
    get("geometry", "m_x", as_int, geo_kw)
    get("geometry", "m_y", as_int, geo_kw)
    get("geometry", "spacing_wavelengths", float, geo_kw)
    get("geometry", "separation_wavelengths", float, geo_kw)
    get("geometry", "element_area_wavelengths2", float, geo_kw)

    get("channel", "distance_m", float, ch_kw, "distance")
    get("channel", "clusters", as_int, ch_kw)
    get("channel", "paths_per_cluster", as_int, ch_kw)
    get("channel", "angular_spread_deg", lambda s: math.radians(float(s)), ch_kw, "angular_spread")
    get("channel", "scenario", Scenario, kw)
    for key in ("a_los", "a_nlos", "b_los", "b_nlos", "sigma_xi_los", "sigma_xi_nlos"):
        get("channel", key, float, pl_kw)

    get("link", "bandwidth_mhz", float, kw)
    get("link", "noise_psd_dbm_hz", float, kw)
    get("link", "power_dbm", grid, kw)
    get("link", "rate_power_dbm", grid, kw)
    get("link", "aber_power_dbm", grid, kw)
    get("link", "modulation_order", as_int, kw)

    get("precoder", "case", lambda s: PrecodingCase(as_int(s)), kw)
    get("precoder", "codebook_step_deg", float, kw)

    get("ris", "group_count", as_int, kw)
    get("ris", "grouping", GroupingStrategy, kw)
    get("ris", "grouping_base", GroupingStrategy, kw)
    if cp.has_option("ris", "architectures"):
        kw["_arch_tokens"] = [t for t in cp.get("ris", "architectures").split(",") if t.strip()]

    get("eval", "trials", as_int, kw)
    get("eval", "aber_trials", as_int, kw)
    get("eval", "aber_symbols_per_trial", as_int, kw)
    get("eval", "seed", as_int, kw)
    get("eval", "threads", as_int, kw)

    get("sweep", "axis", lambda s: s.strip().lower(), kw, "sweep_axis")
    get("sweep", "values", grid, kw, "sweep_values")

    get("snr_gain", "cluster_counts", int_grid, kw, "cluster_counts")
    get("snr_gain", "include_rayleigh", as_bool, kw)

    get("pattern", "resolution_deg", float, kw, "pattern_resolution_deg")
    get("pattern", "cut_deg", float, kw, "pattern_cut_deg")
    get("pattern", "normalization", lambda s: s.strip().lower(), kw, "pattern_normalization")
    get("pattern", "azimuth_deg", float, kw, "pattern_azimuth_deg")
    get("pattern", "elevation_deg", float, kw, "pattern_elevation_deg")

    get("complexity", "group_counts", int_grid, kw, "complexity_groups")

    for section in SECTIONS:
        if cp.has_section(section):
            known = _KNOWN_KEYS[section]
            for key in cp.options(section):
                if key not in known:
                    problems.append(f"{section}.{key}: unknown option")
    return kw, geo_kw, ch_kw, pl_kw, problems


_KNOWN_KEYS = {
    "geometry": {"carrier_ghz", "m_x", "m_y", "spacing_wavelengths",
                 "separation_wavelengths", "element_area_wavelengths2"},
    "channel": {"distance_m", "clusters", "paths_per_cluster", "angular_spread_deg",
                "scenario", "a_los", "a_nlos", "b_los", "b_nlos", "sigma_xi_los",
                "sigma_xi_nlos"},
    "link": {"bandwidth_mhz", "noise_psd_dbm_hz", "power_dbm", "rate_power_dbm",
             "aber_power_dbm", "modulation_order"},
    "precoder": {"case", "codebook_step_deg"},
    "ris": {"group_count", "grouping", "grouping_base", "architectures"},
    "eval": {"trials", "aber_trials", "aber_symbols_per_trial", "seed", "threads"},
    "sweep": {"axis", "values"},
    "snr_gain": {"cluster_counts", "include_rayleigh"},
    "pattern": {"resolution_deg", "cut_deg", "normalization", "azimuth_deg", "elevation_deg"},
    "complexity": {"group_counts"},
}

SWEEP_AXES = ("power", "array_size", "separation", "group_count")


def _validate(cfg: ExperimentConfig) -> list[str]:
    p = []
    g = cfg.geometry
    M = g.m_x * g.m_y
    if g.m_x < 1 or g.m_y < 1:
        p.append("geometry.m_x/m_y: must be >= 1")
    for name in ("carrier_ghz", "spacing_wavelengths", "separation_wavelengths"):
        if not getattr(g, name) > 0:
            p.append(f"geometry.{name}: must be positive")
    if g.element_area_wavelengths2 is not None and not g.element_area_wavelengths2 > 0:
        p.append("geometry.element_area_wavelengths2: must be positive")
    if cfg.bandwidth_mhz <= 0:
        p.append("link.bandwidth_mhz: must be positive")
    for name in ("power_dbm", "rate_power_dbm", "aber_power_dbm"):
        if len(getattr(cfg, name)) == 0:
            p.append(f"link.{name}: grid is empty")
    mo = cfg.modulation_order
    if mo < 2 or mo & (mo - 1):
        p.append(f"link.modulation_order: must be a power of two >= 2, got {mo}")
    if cfg.codebook_step_deg <= 0:
        p.append("precoder.codebook_step_deg: must be positive")
    if cfg.trials < 1:
        p.append("eval.trials: must be >= 1")
    if cfg.aber_trials < 1:
        p.append("eval.aber_trials: must be >= 1")
    if cfg.aber_symbols_per_trial < 1:
        p.append("eval.aber_symbols_per_trial: must be >= 1")
    if cfg.threads < 1:
        p.append("eval.threads: must be >= 1")
    if cfg.seed < 0:
        p.append("eval.seed: must be non-negative")
    for spec in cfg.architectures:
        if spec.architecture in (Architecture.BD_FULL, Architecture.BD_GROUP):
            G = spec.group_count
            if G < 1 or M % G:
                p.append(f"ris.group_count: G={G} does not divide M={M}")
            elif spec.strategy is GroupingStrategy.ROWS and g.m_y % G:
                p.append(f"ris.grouping: rows grouping needs G dividing m_y={g.m_y}, got {G}")
            elif spec.strategy is GroupingStrategy.MIRROR_SYMMETRIC and G % 2:
                p.append(f"ris.grouping: mirror grouping needs an even G, got {G}")
    if cfg.sweep_axis not in SWEEP_AXES:
        p.append(f"sweep.axis: must be one of {', '.join(SWEEP_AXES)}")
    if any(c < 1 for c in cfg.cluster_counts):
        p.append("snr_gain.cluster_counts: must be >= 1")
    if cfg.pattern_resolution_deg <= 0 or cfg.pattern_cut_deg <= 0:
        p.append("pattern.resolution_deg/cut_deg: must be positive")
    if cfg.pattern_normalization not in ("sphere", "hemisphere"):
        p.append("pattern.normalization: must be sphere or hemisphere")
    if any(G < 1 or M % G for G in cfg.complexity_groups):
        p.append(f"complexity.group_counts: every G must divide M={M}")
    return p


def load_config(path: str | os.PathLike | None = None, text: str | None = None) -> ExperimentConfig:
    """Read an INI file (or string) on top of the defaults and validate it."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError([f"<file>: {exc}".replace("\n", " ")]) from None
    elif text is not None:
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError([f"<file>: {exc}".replace("\n", " ")]) from None

    kw, geo_kw, ch_kw, pl_kw, problems = _parse(cp)
    arch_tokens = kw.pop("_arch_tokens", None)
    try:
        geometry = GeometryConfig(**geo_kw)
    except (TypeError, ValueError) as exc:
        problems.append(f"geometry: {exc}")
        geometry = GeometryConfig()
    try:
        channel = ChannelParams(path_loss=PathLossModel(**pl_kw), **ch_kw)
    except ValueError as exc:
        problems.append(f"channel: {exc}")
        channel = ChannelParams()

    G = kw.get("group_count", 1)
    strategy = kw.get("grouping", GroupingStrategy.LINEAR)
    base = kw.get("grouping_base", GroupingStrategy.LINEAR)
    tokens = arch_tokens if arch_tokens is not None else ["active", "dris", "bd"]
    archs = []
    for tok in tokens:
        try:
            archs.append(parse_arch(tok, G, strategy, base))
        except ValueError as exc:
            problems.append(f"ris.architectures: {exc}")
    if not archs:
        problems.append("ris.architectures: no architecture selected")

    cfg = ExperimentConfig(geometry=geometry, channel=channel,
                           architectures=tuple(archs), **kw)
    problems += _validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def validate_config(config_path) -> ExperimentConfig:
    return load_config(config_path)


def config_to_ini(cfg: ExperimentConfig) -> str:
    """Serialise a config back to INI text (round-trips through :func:`load_config`)."""
    fmt = lambda xs: ", ".join(repr(float(x)) for x in xs)
    ch = cfg.channel
    pl = ch.path_loss
    g = cfg.geometry
    tokens = []
    for s in cfg.architectures:
        if s.architecture in (Architecture.ACTIVE, Architecture.DRIS):
            tokens.append(s.label)
        else:
            tokens.append(f"bd:{s.group_count}:{s.strategy.value}:{s.base.value}")
    data = {
        "geometry": {"carrier_ghz": g.carrier_ghz, "m_x": g.m_x, "m_y": g.m_y,
                     "spacing_wavelengths": g.spacing_wavelengths,
                     "separation_wavelengths": g.separation_wavelengths},
        "channel": {"distance_m": ch.distance, "clusters": ch.clusters,
                    "paths_per_cluster": ch.paths_per_cluster,
                    "angular_spread_deg": math.degrees(ch.angular_spread),
                    "scenario": cfg.scenario.value, "a_los": pl.a_los, "a_nlos": pl.a_nlos,
                    "b_los": pl.b_los, "b_nlos": pl.b_nlos,
                    "sigma_xi_los": pl.sigma_xi_los, "sigma_xi_nlos": pl.sigma_xi_nlos},
        "link": {"bandwidth_mhz": cfg.bandwidth_mhz, "noise_psd_dbm_hz": cfg.noise_psd_dbm_hz,
                 "power_dbm": fmt(cfg.power_dbm), "rate_power_dbm": fmt(cfg.rate_power_dbm),
                 "aber_power_dbm": fmt(cfg.aber_power_dbm),
                 "modulation_order": cfg.modulation_order},
        "precoder": {"case": cfg.case.value, "codebook_step_deg": cfg.codebook_step_deg},
        "ris": {"group_count": cfg.group_count, "grouping": cfg.grouping.value,
                "grouping_base": cfg.grouping_base.value, "architectures": ", ".join(tokens)},
        "eval": {"trials": cfg.trials, "aber_trials": cfg.aber_trials,
                 "aber_symbols_per_trial": cfg.aber_symbols_per_trial,
                 "seed": cfg.seed, "threads": cfg.threads},
        "sweep": {"axis": cfg.sweep_axis, "values": fmt(cfg.sweep_values)},
        "snr_gain": {"cluster_counts": ", ".join(str(c) for c in cfg.cluster_counts),
                     "include_rayleigh": str(cfg.include_rayleigh).lower()},
        "pattern": {"resolution_deg": cfg.pattern_resolution_deg, "cut_deg": cfg.pattern_cut_deg,
                    "normalization": cfg.pattern_normalization,
                    "azimuth_deg": cfg.pattern_azimuth_deg,
                    "elevation_deg": cfg.pattern_elevation_deg},
        "complexity": {"group_counts": ", ".join(str(c) for c in cfg.complexity_groups)},
    }
    if g.element_area_wavelengths2 is not None:
        data["geometry"]["element_area_wavelengths2"] = g.element_area_wavelengths2
    lines = []
    for section, values in data.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in values.items()]
        lines.append("")
    return "\n".join(lines)
