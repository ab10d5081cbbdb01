"""Planar RIS cell layout, antenna-to-cell distances and array responses.

Cells are indexed ``m = m_y * M_x + m_x`` (0-based). Positions are measured
from the corner cell ``(m_x, m_y) = (0, 0)``; the feeding antenna sits on the
normal through the geometric centre of the surface at distance ``d_c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def wavelength_from_frequency(carrier_hz: float) -> float:
    if carrier_hz <= 0:
        raise ValueError(f"carrier_hz must be positive, got {carrier_hz}")
    return SPEED_OF_LIGHT / carrier_hz


@dataclass(frozen=True)
class Direction:
    """Departure direction: azimuth in [-pi, pi], elevation in [0, pi/2]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        # small slack so grid end points like np.pi survive float round-off
        eps = 1e-12
        if not (-math.pi - eps <= self.azimuth <= math.pi + eps):
            raise ValueError(f"azimuth {self.azimuth} outside [-pi, pi]")
        if not (-eps <= self.elevation <= math.pi / 2 + eps):
            raise ValueError(f"elevation {self.elevation} outside [0, pi/2]")


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    m_x_count: int
    m_y_count: int
    dx: float
    dy: float
    d_c: float
    wavelength: float
    element_area: float
    positions: np.ndarray = field(repr=False)
    d_prime: np.ndarray = field(repr=False)
    d_m: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.m_x_count * self.m_y_count

    @property
    def m_x(self) -> np.ndarray:
        return np.arange(self.size) % self.m_x_count

    @property
    def m_y(self) -> np.ndarray:
        return np.arange(self.size) // self.m_x_count

    def index(self, m_x: int, m_y: int) -> int:
        return m_y * self.m_x_count + m_x

    def with_separation(self, d_c: float) -> "ArrayGeometry":
        return build_geometry(self.m_x_count, self.m_y_count, self.dx, self.dy,
                              d_c, self.wavelength, self.element_area)


def build_geometry(m_x_count: int, m_y_count: int, dx: float, dy: float,
                   d_c: float, wavelength: float,
                   element_area: float) -> ArrayGeometry:
    """Lay out an ``m_x_count`` x ``m_y_count`` surface and its feed distances."""
    for name, value in (("m_x_count", m_x_count), ("m_y_count", m_y_count)):
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value}")
    for name, value in (("dx", dx), ("dy", dy), ("d_c", d_c),
                        ("wavelength", wavelength),
                        ("element_area", element_area)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    m_x_count, m_y_count = int(m_x_count), int(m_y_count)

    m = np.arange(m_x_count * m_y_count)
    mx = m % m_x_count
    my = m // m_x_count
    positions = np.stack([mx * dx, my * dy], axis=1).astype(float)
    d_prime = 0.5 * np.hypot(dx * np.abs(2 * mx - m_x_count + 1),
                             dy * np.abs(2 * my - m_y_count + 1))
    d_m = np.sqrt(d_c ** 2 + d_prime ** 2)
    for arr in (positions, d_prime, d_m):
        arr.setflags(write=False)
    return ArrayGeometry(m_x_count, m_y_count, float(dx), float(dy), float(d_c),
                         float(wavelength), float(element_area),
                         positions, d_prime, d_m)


def wavevector(direction: Direction, wavelength: float) -> np.ndarray:
    s = math.sin(direction.elevation)
    return (2 * math.pi / wavelength) * np.array(
        [s * math.cos(direction.azimuth), s * math.sin(direction.azimuth)])


def steering_vector(geometry: ArrayGeometry, direction: Direction) -> np.ndarray:
    k = wavevector(direction, geometry.wavelength)
    return np.exp(1j * (geometry.positions @ k)) / math.sqrt(geometry.size)


def steering_matrix(geometry: ArrayGeometry, azimuth, elevation) -> np.ndarray:
    """Steering vectors for broadcastable angle arrays, shape ``(..., M)``.

    Unlike :class:`Direction` this accepts any real angle, which is what the
    Laplace-spread path angles need.
    """
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    scale = 2 * np.pi / geometry.wavelength
    s = np.sin(elevation)
    kx = scale * s * np.cos(azimuth)
    ky = scale * s * np.sin(azimuth)
    phase = (kx[..., None] * geometry.positions[:, 0]
             + ky[..., None] * geometry.positions[:, 1])
    return np.exp(1j * phase) / math.sqrt(geometry.size)
