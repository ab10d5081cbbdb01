"""Channel amplitude variation, SNR expressions and beam-pattern directivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, steering_matrix

HALF_POWER_DB = 10 * math.log10(2)


@dataclass(frozen=True)
class CavReport:
    mean: float
    std: float
    cav: float


def cav(g) -> CavReport:
    """Population std of ``|g|`` over its mean (dimensionless, scale-free)."""
    amp = np.abs(np.asarray(g))
    if amp.size == 0:
        raise ValueError("cav: empty channel")
    mu = amp.mean()
    if mu == 0:
        raise ValueError("cav: channel amplitudes are all zero")
    sigma = math.sqrt(np.mean((amp - mu) ** 2))
    return CavReport(float(mu), sigma, sigma / float(mu))


def effective_channel(h, omega, g) -> complex:
    """``h^T Omega g``; ``omega`` may be a matrix or a ScatteringMatrix."""
    h = np.asarray(h)
    zeta = omega.apply(np.asarray(g)) if hasattr(omega, "apply") else np.asarray(omega) @ g
    return complex(h @ zeta)


def snr_linear(h_eff, power, noise_power):
    if np.any(np.asarray(power) <= 0) or noise_power <= 0:
        raise ValueError("power and noise power must be positive")
    return np.asarray(power) * np.abs(h_eff) ** 2 / noise_power


def gain_floor_db(cav_value: float) -> float:
    """Guaranteed BD-over-D SNR gain for an equal-amplitude RIS-UE channel."""
    if cav_value < 0:
        raise ValueError("CAV must be non-negative")
    return 10 * math.log10(1 + cav_value ** 2)


def gain_ceiling_db(cav_value: float) -> float:
    """Large-array BD-over-D SNR gain under Rayleigh RIS-UE fading."""
    return gain_floor_db(cav_value) + 10 * math.log10(4 / math.pi)


def snr_dris_closed_form(h, g):
    """Phase-aligned diagonal RIS: ``(sum |h_m||g_m|)^2`` (batched over rows of h)."""
    return (np.abs(h) @ np.abs(g)) ** 2


def snr_bdris_closed_form(h, g):
    """Fully-connected BD-RIS optimum: ``||h||^2 ||g||^2``."""
    return np.sum(np.abs(h) ** 2, axis=-1) * np.sum(np.abs(g) ** 2)


@dataclass(frozen=True, eq=False)
class BeamPattern:
    azimuth: np.ndarray
    elevation: np.ndarray
    gain: np.ndarray          # raw |sqrt(M) a^T zeta|^2, shape (n_az, n_el)
    directivity_db: np.ndarray
    ppd: float
    hppd: float
    hpbw: float
    peak_azimuth: float
    peak_elevation: float
    cut_angles: np.ndarray    # signed elevation (rad) along the peak cut
    cut_directivity_db: np.ndarray


def _power(zeta, geometry, azimuth, elevation):
    a = steering_matrix(geometry, azimuth, elevation)
    return geometry.size * np.abs(a @ zeta) ** 2


def _trapezoid(y, x, axis=-1):
    return np.trapezoid(y, x, axis=axis) if hasattr(np, "trapezoid") else np.trapz(y, x, axis=axis)


def _half_power_width(angles, level_db):
    """Width between the interpolated -3 dB crossings around the cut peak."""
    k = int(np.argmax(level_db))
    target = -HALF_POWER_DB

    def crossing(step):
        i = k
        while 0 <= i + step < len(angles) and level_db[i + step] >= target:
            i += step
        j = i + step
        if not 0 <= j < len(angles):
            return angles[i]
        t = (level_db[i] - target) / (level_db[i] - level_db[j])
        return angles[i] + t * (angles[j] - angles[i])

    return abs(crossing(+1) - crossing(-1)), k


def beam_pattern(zeta, geometry: ArrayGeometry, az_grid, el_grid,
                 cut_resolution: float = math.radians(1.0),
                 normalization: str = "sphere") -> BeamPattern:
    """Directivity of the radiated vector ``zeta`` over a front-hemisphere grid.

    The directivity denominator integrates ``p * sin(theta)`` over the grid
    with the trapezoid rule. With ``normalization="sphere"`` the surface is
    treated as a planar array of isotropic cells radiating the mirror image
    pattern behind the aperture, i.e. the hemisphere integral is doubled.
    HPBW and HPPD are read on the elevation cut through the peak sampled at
    ``cut_resolution``; HPPD is the directivity of the cut sample closest to
    the half-power level.
    """
    zeta = np.asarray(zeta, dtype=complex)
    if not np.any(zeta):
        raise ValueError("beam_pattern: effective vector is all zero")
    az = np.asarray(az_grid, dtype=float)
    el = np.asarray(el_grid, dtype=float)
    if az.size < 2 or el.size < 2 or np.any(np.diff(az) <= 0) or np.any(np.diff(el) <= 0):
        raise ValueError("beam_pattern: grids must be increasing with >= 2 points")
    if normalization not in ("sphere", "hemisphere"):
        raise ValueError(f"unknown normalization {normalization!r}")

    p = _power(zeta, geometry, az[:, None], el[None, :])
    integral = _trapezoid(_trapezoid(p * np.sin(el)[None, :], el, axis=1), az)
    if normalization == "sphere":
        integral *= 2.0
    with np.errstate(divide="ignore"):
        directivity_db = 10 * np.log10(4 * np.pi * p / integral)

    i, j = np.unravel_index(int(np.argmax(p)), p.shape)
    peak_az, peak_el = float(az[i]), float(el[j])
    if peak_el == 0.0:
        peak_az = 0.0
    lo = -math.floor((math.pi / 2 + peak_el) / cut_resolution + 1e-9)
    hi = math.floor((math.pi / 2 - peak_el) / cut_resolution + 1e-9)
    cut = peak_el + cut_resolution * np.arange(lo, hi + 1)
    with np.errstate(divide="ignore"):
        cut_db = 10 * np.log10(4 * np.pi * _power(zeta, geometry, peak_az, cut) / integral)
    ppd = float(directivity_db.max())

    rel = cut_db - cut_db.max()
    width, k = _half_power_width(cut, rel)
    # main-lobe samples only: walk out from the peak while the level keeps falling
    lobe = [k]
    for step in (+1, -1):
        i = k
        while 0 <= i + step < len(cut) and rel[i + step] <= rel[i] and rel[i] > -3 * HALF_POWER_DB:
            i += step
            lobe.append(i)
    lobe = np.array(lobe)
    nearest = lobe[np.argmin(np.abs(rel[lobe] + HALF_POWER_DB))]
    hppd = float(cut_db[nearest])

    return BeamPattern(az, el, p, directivity_db, ppd, hppd, math.degrees(width),
                       peak_az, peak_el, cut, cut_db)


def default_pattern_grid(resolution_deg: float = 0.5):
    step = math.radians(resolution_deg)
    n_az = int(round(2 * math.pi / step))
    n_el = int(round(math.pi / 2 / step))
    return -math.pi + step * np.arange(n_az + 1), step * np.arange(n_el + 1)
