"""Monte-Carlo engines: ABER with ML detection, union bound, rate, SNR gain, sweeps.

Every trial draws from its own generator seeded by ``(seed, stream, trial)``
so results do not depend on chunking or thread count. All architectures of
one run see the same channel realizations (common random numbers), and the
ABER engine reuses one symbol/noise draw per trial across power points.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc

from .channel import (ChannelParams, LinkType, Scenario, bs_ris_channel, complex_normal,
                      db_to_linear, path_loss_db, sample_rayleigh_channel,
                      sample_ris_ue_channel)
from .config import ArchSpec, ExperimentConfig, config_to_ini, dbm_to_watt
from .geometry import ArrayGeometry
from .metrics import cav, gain_ceiling_db, gain_floor_db
from .precoder import (PrecodingCase, build_codebook, dominant_eigenmodes,
                       partial_csi_direction, select_codeword)
from .ris_config import (Architecture, active_effective_vectors,
                         bdris_effective_vectors, dris_effective_vectors, make_grouping)
from .results import ResultTable

STREAM_CHANNEL = 0
STREAM_SYMBOLS = 1


def trial_rng(seed: int, stream: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, trial)))


def _chunks(n: int, threads: int):
    size = max(1, math.ceil(n / max(1, threads)))
    return [range(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _parallel(fn, n: int, threads: int):
    """Run ``fn(range)`` over trial chunks and concatenate in trial order."""
    chunks = _chunks(n, threads)
    if threads <= 1 or len(chunks) == 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=0)


def mean_and_se(samples, axis=-1):
    """Compensated mean and standard error ``std/sqrt(T)`` along ``axis``."""
    x = np.moveaxis(np.asarray(samples, dtype=float), axis, -1)
    T = x.shape[-1]
    mean = np.apply_along_axis(math.fsum, -1, x) / T
    if T < 2:
        return mean, np.zeros_like(mean)
    se = np.std(x, axis=-1, ddof=1) / math.sqrt(T)
    return mean, se


# ---------------------------------------------------------------- constellation

@dataclass(frozen=True, eq=False)
class Constellation:
    symbols: np.ndarray  # unit energy
    labels: np.ndarray   # Gray label of each symbol index

    @property
    def order(self) -> int:
        return self.symbols.size

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    def hamming(self) -> np.ndarray:
        x = self.labels[:, None] ^ self.labels[None, :]
        return np.array([[bin(int(v)).count("1") for v in row] for row in x])


def psk_constellation(order: int) -> Constellation:
    """Gray-mapped PSK; QPSK is rotated by pi/4."""
    if order < 2 or order & (order - 1):
        raise ValueError(f"PSK order must be a power of two >= 2, got {order}")
    k = np.arange(order)
    offset = math.pi / 4 if order == 4 else 0.0
    symbols = np.exp(1j * (2 * math.pi * k / order + offset))
    return Constellation(symbols, k ^ (k >> 1))


def ml_detect(y, h_eff, power, constellation) -> np.ndarray:
    """``argmin_s |y - sqrt(P) h_eff s|``; ties go to the lowest symbol index."""
    symbols = constellation.symbols if isinstance(constellation, Constellation) else np.asarray(constellation)
    if symbols.size == 0:
        raise ValueError("ml_detect: empty constellation")
    ref = (np.sqrt(np.asarray(power)) * np.asarray(h_eff))[..., None] * symbols
    dist = np.abs(np.asarray(y)[..., None] - ref)
    return np.argmin(dist, axis=-1)


def qfunc(x):
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2.0))


# ---------------------------------------------------------------- link sets

@dataclass(frozen=True, eq=False)
class LinkSet:
    """Shared channel realizations and the per-architecture effective gains."""

    geometry: ArrayGeometry
    g: np.ndarray
    H: np.ndarray                       # (T, M) RIS-UE channels
    B: np.ndarray                       # (T, M) beamforming vectors
    gains: dict                         # label -> (T,) complex h^T zeta
    labels: tuple[str, ...]


def sample_links(cfg: ExperimentConfig, geometry: ArrayGeometry, trials: int,
                 seed: int | None = None, scenario: Scenario | None = None,
                 case: PrecodingCase | None = None,
                 params: ChannelParams | None = None):
    """Channels and beamforming vectors for trials ``0..trials-1``."""
    seed = cfg.seed if seed is None else seed
    scenario = cfg.scenario if scenario is None else Scenario(scenario)
    case = cfg.case if case is None else PrecodingCase(case)
    params = cfg.channel if params is None else params
    codebook = (build_codebook(geometry, math.radians(cfg.codebook_step_deg))
                if case is PrecodingCase.CASE2_CODEBOOK else None)
    M = geometry.size

    def work(idx):
        H = np.empty((len(idx), M), dtype=complex)
        B = np.empty((len(idx), M), dtype=complex)
        for k, t in enumerate(idx):
            ch = sample_ris_ue_channel(geometry, params, scenario,
                                       trial_rng(seed, STREAM_CHANNEL, t))
            H[k] = ch.h
            if case is PrecodingCase.CASE3_PARTIAL:
                B[k] = partial_csi_direction(ch, geometry).b
        if case is not PrecodingCase.CASE3_PARTIAL:
            V = dominant_eigenmodes(H)
            if case is PrecodingCase.CASE1_SVD:
                B[:] = V
            else:
                for k in range(len(idx)):
                    B[k] = select_codeword(V[k], codebook).b
        return np.stack([H, B], axis=1)

    HB = _parallel(work, trials, cfg.threads)
    return HB[:, 0], HB[:, 1]


def effective_vectors(spec: ArchSpec, geometry: ArrayGeometry, g, B) -> np.ndarray:
    if spec.architecture is Architecture.ACTIVE:
        return active_effective_vectors(B)
    if spec.architecture is Architecture.DRIS:
        return dris_effective_vectors(g, B)
    grouping = make_grouping(geometry, spec.group_count, spec.strategy, spec.base)
    return bdris_effective_vectors(g, B, grouping)


def effective_gains(specs, geometry, g, H, B, threads: int = 1) -> dict:
    out = {}
    for spec in specs:
        def work(idx, spec=spec):
            Z = effective_vectors(spec, geometry, g, B[idx.start:idx.stop])
            return np.sum(H[idx.start:idx.stop] * Z, axis=-1)
        out[spec.label] = _parallel(work, H.shape[0], threads)
    return out


def prepare_links(cfg: ExperimentConfig, geometry: ArrayGeometry | None = None,
                  trials: int | None = None, specs=None, **overrides) -> LinkSet:
    geometry = cfg.build_geometry() if geometry is None else geometry
    trials = cfg.trials if trials is None else trials
    specs = cfg.architectures if specs is None else tuple(specs)
    g = bs_ris_channel(geometry)
    H, B = sample_links(cfg, geometry, trials, **overrides)
    gains = effective_gains(specs, geometry, g, H, B, cfg.threads)
    return LinkSet(geometry, g, H, B, gains, tuple(s.label for s in specs))


def _metadata(cfg: ExperimentConfig, experiment: str, **extra) -> dict:
    meta = {"experiment": experiment, "seed": cfg.seed, "config": config_to_ini(cfg)}
    meta.update(extra)
    return meta


# ---------------------------------------------------------------- ABER

def aber_from_gains(h_eff: np.ndarray, powers_w, noise_w: float,
                    constellation: Constellation, symbols_per_trial: int,
                    seed: int, threads: int = 1):
    """Simulated bit error rate per (architecture, power).

    ``h_eff`` is ``(T,)`` or ``(A, T)``. Returns ``(ber, se)`` of shape
    ``(A, P)``; the standard error is over per-trial error fractions.
    """
    h = np.atleast_2d(np.asarray(h_eff, dtype=complex))
    A, T = h.shape
    amp = np.sqrt(np.asarray(powers_w, dtype=float))
    eta = constellation.bits_per_symbol
    dh = constellation.hamming()
    S = symbols_per_trial

    def work(idx):
        frac = np.empty((len(idx), A, amp.size))
        for k, t in enumerate(idx):
            rng = trial_rng(seed, STREAM_SYMBOLS, t)
            sent = rng.integers(constellation.order, size=S)
            noise = complex_normal(noise_w, rng, size=S)
            tx = constellation.symbols[sent]
            y = amp[None, :, None] * h[:, t, None, None] * tx + noise  # (A, P, S)
            est = ml_detect(y, h[:, t, None, None], amp[None, :, None] ** 2, constellation)
            frac[k] = dh[sent, est].sum(axis=-1) / (S * eta)
        return frac

    frac = _parallel(work, T, threads)  # (T, A, P)
    return mean_and_se(frac, axis=0)


def union_bound_from_gains(h_eff, powers_w, noise_w: float,
                           constellation: Constellation) -> np.ndarray:
    """Hamming-weighted sum of channel-averaged pairwise error probabilities."""
    h = np.atleast_2d(np.abs(np.asarray(h_eff)))
    amp = np.sqrt(np.asarray(powers_w, dtype=float))
    s = constellation.symbols
    dist = np.abs(s[:, None] - s[None, :])
    dh = constellation.hamming()
    pairs = [(i, j) for i in range(s.size) for j in range(s.size) if i != j]
    bound = np.zeros((h.shape[0], amp.size))
    for i, j in pairs:
        arg = amp[None, :, None] * h[:, None, :] * dist[i, j] / (math.sqrt(2 * noise_w))
        upep = qfunc(arg).mean(axis=-1)
        bound += dh[i, j] * upep
    return bound / (constellation.bits_per_symbol * constellation.order)


def simulate_aber(cfg: ExperimentConfig, links: LinkSet | None = None) -> ResultTable:
    links = links or prepare_links(cfg, trials=cfg.aber_trials)
    const = psk_constellation(cfg.modulation_order)
    powers = np.array(cfg.aber_power_dbm)
    h = np.stack([links.gains[k] for k in links.labels])
    ber, se = aber_from_gains(h, dbm_to_watt(powers), cfg.noise_power_w, const,
                              cfg.aber_symbols_per_trial, cfg.seed, cfg.threads)
    cols = ["power_dbm"] + [f"{p}_{k}" for k in links.labels for p in ("aber", "se")]
    table = ResultTable(cols, metadata=_metadata(
        cfg, "aber", trials=h.shape[1],
        bits_per_point=h.shape[1] * cfg.aber_symbols_per_trial * const.bits_per_symbol))
    for n, P in enumerate(powers):
        row = {"power_dbm": float(P)}
        for a, k in enumerate(links.labels):
            row[f"aber_{k}"] = float(ber[a, n])
            row[f"se_{k}"] = float(se[a, n])
        table.add_row(**row)
    return table


def theoretical_aber(cfg: ExperimentConfig, links: LinkSet | None = None) -> ResultTable:
    links = links or prepare_links(cfg, trials=cfg.aber_trials)
    const = psk_constellation(cfg.modulation_order)
    powers = np.array(cfg.aber_power_dbm)
    h = np.stack([links.gains[k] for k in links.labels])
    bound = union_bound_from_gains(h, dbm_to_watt(powers), cfg.noise_power_w, const)
    table = ResultTable(["power_dbm"] + [f"bound_{k}" for k in links.labels],
                        metadata=_metadata(cfg, "aber_bound", trials=h.shape[1]))
    for n, P in enumerate(powers):
        table.add_row(power_dbm=float(P),
                      **{f"bound_{k}": float(bound[a, n]) for a, k in enumerate(links.labels)})
    return table


# ---------------------------------------------------------------- rate

def rate_samples(h_eff, powers_w, noise_w: float) -> np.ndarray:
    """Per-trial ``log2(1 + P|h_eff|^2/noise)``, shape ``(..., P, T)``."""
    snr = np.asarray(powers_w, dtype=float)[:, None] * np.abs(np.asarray(h_eff))[..., None, :] ** 2
    return np.log2(1.0 + snr / noise_w)


def achievable_rate(cfg: ExperimentConfig, links: LinkSet | None = None,
                    powers_dbm=None) -> ResultTable:
    links = links or prepare_links(cfg)
    powers = np.array(cfg.rate_power_dbm if powers_dbm is None else powers_dbm, dtype=float)
    cols = ["power_dbm"] + [f"{p}_{k}" for k in links.labels for p in ("rate", "se")]
    table = ResultTable(cols, metadata=_metadata(cfg, "rate", trials=links.H.shape[0]))
    stats = {k: mean_and_se(rate_samples(links.gains[k], dbm_to_watt(powers),
                                         cfg.noise_power_w)) for k in links.labels}
    for n, P in enumerate(powers):
        row = {"power_dbm": float(P)}
        for k in links.labels:
            row[f"rate_{k}"] = float(stats[k][0][n])
            row[f"se_{k}"] = float(stats[k][1][n])
        table.add_row(**row)
    return table


# ---------------------------------------------------------------- SNR gain

def snr_gain_samples(cfg: ExperimentConfig, clusters: int | None, trials: int,
                     geometry: ArrayGeometry | None = None) -> np.ndarray:
    """Per-trial ``10 log10(SNR_BD / SNR_D)`` with full-CSI configuration.

    ``clusters=None`` selects the i.i.d. Rayleigh RIS-UE surrogate. Clustered
    channels use one path per cluster and no LOS component.
    """
    geometry = cfg.build_geometry() if geometry is None else geometry
    g = bs_ris_channel(geometry)
    M = geometry.size
    if clusters is None:
        model = cfg.channel.path_loss
        variance = float(db_to_linear(-path_loss_db(cfg.channel.distance, LinkType.NLOS,
                                                    model=model)))

        def draw(idx):
            return np.stack([sample_rayleigh_channel(M, variance,
                                                     trial_rng(cfg.seed, STREAM_CHANNEL, t))
                             for t in idx])
        H = _parallel(draw, trials, cfg.threads)
    else:
        params = replace(cfg.channel, clusters=int(clusters), paths_per_cluster=1)
        H, _ = sample_links(cfg, geometry, trials, scenario=Scenario.LOS_BLOCKED,
                            case=PrecodingCase.CASE1_SVD, params=params)
    V = dominant_eigenmodes(H)
    bd = ArchSpec(Architecture.BD_FULL)
    d = ArchSpec(Architecture.DRIS)
    gains = effective_gains((bd, d), geometry, g, H, V, cfg.threads)
    return 20 * np.log10(np.abs(gains["bd"]) / np.abs(gains["dris"]))


def snr_gain_sweep(cluster_counts, cfg: ExperimentConfig, trials: int | None = None,
                   include_rayleigh: bool | None = None) -> ResultTable:
    trials = cfg.trials if trials is None else trials
    include_rayleigh = cfg.include_rayleigh if include_rayleigh is None else include_rayleigh
    geometry = cfg.build_geometry()
    c = cav(bs_ris_channel(geometry)).cav
    floor, ceiling = gain_floor_db(c), gain_ceiling_db(c)
    table = ResultTable(["richness", "clusters", "gain_db", "se_db", "floor_db",
                         "ceiling_db", "cav"],
                        metadata=_metadata(cfg, "snr_gain", trials=trials))
    levels = [int(k) for k in cluster_counts]
    if any(k < 1 for k in levels):
        raise ValueError("cluster counts must be >= 1")
    for k in levels + ([None] if include_rayleigh else []):
        mean, se = mean_and_se(snr_gain_samples(cfg, k, trials, geometry))
        table.add_row(richness="rayleigh" if k is None else f"clusters_{k}",
                      clusters=-1 if k is None else k, gain_db=float(mean), se_db=float(se),
                      floor_db=floor, ceiling_db=ceiling, cav=c)
    return table


# ---------------------------------------------------------------- sweeps

DEFAULT_SWEEP_VALUES = {
    "power": None,
    "array_size": (2, 4, 6, 8, 10),
    "separation": (0.5, 1.0, 1.5, 2.0),
    "group_count": (1, 2, 4, 5, 10, 20),
}


def _check_spec(spec: ArchSpec, geometry: ArrayGeometry):
    if spec.architecture in (Architecture.BD_FULL, Architecture.BD_GROUP):
        make_grouping(geometry, spec.group_count, spec.strategy, spec.base)


def sweep(axis: str, cfg: ExperimentConfig, values=None,
          trials: int | None = None) -> ResultTable:
    """Rate per architecture along one parameter axis, all else fixed.

    Invalid axis points become rows whose ``status`` holds the reason and
    whose metric cells are NaN.
    """
    axis = axis.lower()
    if axis not in DEFAULT_SWEEP_VALUES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    trials = cfg.trials if trials is None else trials
    if values is None or len(values) == 0:
        values = DEFAULT_SWEEP_VALUES[axis] or cfg.rate_power_dbm
    power_w = dbm_to_watt([cfg.power_dbm[0]])

    if axis == "power":
        table = achievable_rate(cfg, prepare_links(cfg, trials=trials), powers_dbm=values)
        table.metadata["experiment"] = "sweep_power"
        return table

    if axis == "group_count":
        labels = ["active", "dris", "bd"]
    else:
        labels = [s.label for s in cfg.architectures]
    cols = ["axis_value", "status", "cav"] + [f"{p}_{k}" for k in labels for p in ("rate", "se")]
    table = ResultTable(cols, metadata=_metadata(cfg, f"sweep_{axis}", trials=trials,
                                                 power_dbm=cfg.power_dbm[0]))
    nan_row = {c: float("nan") for c in cols[2:]}

    for value in values:
        try:
            if axis == "array_size":
                n = int(value)
                if n != value or n < 1:
                    raise ValueError(f"array size must be a positive integer, got {value}")
                geometry = cfg.geometry.build(m_x=n, m_y=n)
                specs = cfg.architectures
            elif axis == "separation":
                if not value > 0:
                    raise ValueError(f"separation must be positive, got {value}")
                geometry = cfg.geometry.build(separation_wavelengths=value)
                specs = cfg.architectures
            else:
                geometry = cfg.build_geometry()
                G = int(value)
                if G != value:
                    raise ValueError(f"group count must be an integer, got {value}")
                strategy = cfg.grouping
                bd = ArchSpec(Architecture.BD_FULL if G == 1 else Architecture.BD_GROUP,
                              G, strategy, cfg.grouping_base)
                specs = (ArchSpec(Architecture.ACTIVE), ArchSpec(Architecture.DRIS), bd)
            for spec in specs:
                _check_spec(spec, geometry)
        except ValueError as exc:
            table.add_row(axis_value=float(value), status=f"skipped: {exc}".replace(",", ";"),
                          **nan_row)
            continue
        g = bs_ris_channel(geometry)
        H, B = sample_links(cfg, geometry, trials)
        gains = effective_gains(specs, geometry, g, H, B, cfg.threads)
        row = {"axis_value": float(value), "status": "ok", "cav": cav(g).cav}
        for spec, label in zip(specs, labels):
            m, se = mean_and_se(rate_samples(gains[spec.label], power_w, cfg.noise_power_w))
            row[f"rate_{label}"] = float(m[0])
            row[f"se_{label}"] = float(se[0])
        table.add_row(**row)
    return table

