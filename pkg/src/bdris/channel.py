"""Feed (BS-RIS) near-field channel and clustered RIS-UE channel."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayGeometry, steering_matrix


class Scenario(enum.Enum):
    LOS_PRESENT = "los"
    LOS_BLOCKED = "nlos"


class LinkType(enum.Enum):
    LOS = "los"
    NLOS = "nlos"


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(value)


def noise_power_dbm(psd_dbm_per_hz: float, bandwidth_hz: float) -> float:
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth_hz must be positive, got {bandwidth_hz}")
    return psd_dbm_per_hz + 10.0 * math.log10(bandwidth_hz)


def bs_ris_channel(geometry: ArrayGeometry) -> np.ndarray:
    """Rayleigh-Sommerfeld coefficients from the feed antenna to every cell."""
    d = geometry.d_m
    lam = geometry.wavelength
    amplitude = geometry.element_area * geometry.d_c / d ** 2
    return amplitude * (1.0 / (2 * np.pi * d) - 1j / lam) * np.exp(2j * np.pi * d / lam)


@dataclass(frozen=True)
class PathLossModel:
    """Close-in path loss with log-normal shadowing, parameters in dB."""

    a_los: float = 61.4
    a_nlos: float = 72.0
    b_los: float = 2.0
    b_nlos: float = 2.92
    sigma_xi_los: float = 5.8
    sigma_xi_nlos: float = 8.7

    def __post_init__(self):
        for name in ("a_los", "a_nlos", "sigma_xi_los", "sigma_xi_nlos"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("b_los", "b_nlos"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def parameters(self, link_type: LinkType) -> tuple[float, float, float]:
        if LinkType(link_type) is LinkType.LOS:
            return self.a_los, self.b_los, self.sigma_xi_los
        return self.a_nlos, self.b_nlos, self.sigma_xi_nlos


def path_loss_db(d: float, link_type: LinkType, shadowing: float = 0.0,
                 model: PathLossModel | None = None) -> float:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    a, b, _ = (model or PathLossModel()).parameters(link_type)
    return a + 10.0 * b * math.log10(d) + shadowing


def sample_laplace(location, scale, rng: np.random.Generator, size=None):
    """Inverse-CDF Laplace draw: ``loc - scale*sign(U)*ln(1-2|U|)``."""
    if not np.all(np.asarray(scale) > 0):
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    # keep |u| < 1/2 so the log stays finite
    u = np.clip(u, -0.5 + 2 ** -53, 0.5 - 2 ** -53)
    x = location - scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(x) if size is None else x


def complex_normal(variance, rng: np.random.Generator, size=None):
    std = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return std * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


@dataclass(frozen=True)
class ChannelParams:
    """Large- and small-scale parameters of the RIS-UE link."""

    distance: float = 20.0
    clusters: int = 8
    paths_per_cluster: int = 10
    angular_spread: float = math.radians(7.5)
    path_loss: PathLossModel = field(default_factory=PathLossModel)

    def __post_init__(self):
        if self.clusters < 1 or int(self.clusters) != self.clusters:
            raise ValueError(f"clusters must be a positive integer, got {self.clusters}")
        if self.paths_per_cluster < 1 or int(self.paths_per_cluster) != self.paths_per_cluster:
            raise ValueError("paths_per_cluster must be a positive integer, "
                             f"got {self.paths_per_cluster}")
        if self.distance <= 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        if self.angular_spread <= 0:
            raise ValueError("angular_spread must be positive")


@dataclass(frozen=True, eq=False)
class ClusterParams:
    mean_azimuth: float
    mean_elevation: float
    angular_spread: float
    path_gains: np.ndarray
    path_azimuths: np.ndarray
    path_elevations: np.ndarray
    sub_channel: np.ndarray


@dataclass(frozen=True, eq=False)
class RisUeChannel:
    """One realization of the RIS-UE channel.

    ``los`` and each cluster's ``sub_channel`` are the bracketed terms of the
    clustered model (before the common ``prefactor``), so that
    ``h == prefactor * (los + sum(sub_channels))``. The received signal is
    ``h @ zeta`` (plain transpose, no conjugate).
    """

    h: np.ndarray
    los: np.ndarray
    los_azimuth: float
    los_elevation: float
    los_gain: complex
    clusters: tuple[ClusterParams, ...]
    scenario: Scenario
    prefactor: float
    sigma2_los: float
    sigma2_nlos: float

    @property
    def sub_channels(self) -> np.ndarray:
        """Stacked ``[h_0, h_1, ..., h_C]``, LOS first."""
        return np.vstack([self.los] + [c.sub_channel for c in self.clusters])

    @property
    def directions(self) -> np.ndarray:
        """``(C+1, 2)`` azimuth/elevation per sub-channel, LOS first."""
        rows = [(self.los_azimuth, self.los_elevation)]
        rows += [(c.mean_azimuth, c.mean_elevation) for c in self.clusters]
        return np.array(rows)


def sample_ris_ue_channel(geometry: ArrayGeometry, params: ChannelParams,
                          scenario: Scenario,
                          rng: np.random.Generator) -> RisUeChannel:
    """Draw one clustered geometric channel realization.

    Shadowing is drawn once per realization and per link type, shared by
    all paths of that type. Laplace-spread angles are not wrapped.
    """
    scenario = Scenario(scenario)
    C, L = int(params.clusters), int(params.paths_per_cluster)
    M = geometry.size
    pl = params.path_loss

    xi_los = rng.normal(0.0, pl.sigma_xi_los)
    xi_nlos = rng.normal(0.0, pl.sigma_xi_nlos)
    sigma2_los = float(db_to_linear(-path_loss_db(params.distance, LinkType.LOS, xi_los, pl)))
    sigma2_nlos = float(db_to_linear(-path_loss_db(params.distance, LinkType.NLOS, xi_nlos, pl)))

    alpha = complex(complex_normal(sigma2_los, rng))
    phi0 = rng.uniform(-np.pi, np.pi)
    theta0 = rng.uniform(0.0, np.pi / 2)

    mean_az = rng.uniform(-np.pi, np.pi, size=C)
    mean_el = rng.uniform(0.0, np.pi / 2, size=C)
    spread = params.angular_spread
    path_az = sample_laplace(mean_az[:, None], spread, rng, size=(C, L))
    path_el = sample_laplace(mean_el[:, None], spread, rng, size=(C, L))
    beta = complex_normal(sigma2_nlos, rng, size=(C, L))

    if scenario is Scenario.LOS_BLOCKED:
        alpha = 0j
        prefactor = math.sqrt(M / (C * L))
    else:
        prefactor = math.sqrt(M / (C * L + 1))

    los = alpha * steering_matrix(geometry, phi0, theta0).conj()
    path_vectors = steering_matrix(geometry, path_az, path_el).conj()  # (C, L, M)
    sub = np.einsum("cl,clm->cm", beta, path_vectors)
    clusters = tuple(
        ClusterParams(float(mean_az[c]), float(mean_el[c]), spread, beta[c],
                      path_az[c], path_el[c], sub[c])
        for c in range(C))
    h = prefactor * (los + sub.sum(axis=0))
    return RisUeChannel(h, los, float(phi0), float(theta0), alpha, clusters,
                        scenario, prefactor, sigma2_los, sigma2_nlos)


def sample_rayleigh_channel(size: int, variance: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Entrywise i.i.d. CN(0, variance) RIS-UE vector (rich-scattering surrogate)."""
    return complex_normal(variance, rng, size=size)
