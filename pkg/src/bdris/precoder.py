"""Beamforming vectors under the three CSI regimes.

* Case 1: dominant right singular vector of the row channel ``h^T``.
* Case 2: best codeword of a uniform angular codebook, index fed back.
* Case 3: steering vector toward the sub-channel with the best
  signal-to-leakage ratio (LOS or a cluster mean direction).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import RisUeChannel
from .geometry import ArrayGeometry, steering_matrix


class PrecodingCase(enum.Enum):
    CASE1_SVD = 1
    CASE2_CODEBOOK = 2
    CASE3_PARTIAL = 3


@dataclass(frozen=True, eq=False)
class BeamformingVector:
    b: np.ndarray
    origin: PrecodingCase
    codeword_index: tuple[int, int] | None = None
    direction: tuple[float, float] | None = None


@dataclass(frozen=True, eq=False)
class Codebook:
    azimuths: np.ndarray
    elevations: np.ndarray
    beams: np.ndarray  # (n_az, n_el, M)

    @property
    def size(self) -> int:
        return self.beams.shape[0] * self.beams.shape[1]

    def beam(self, i: int, j: int) -> np.ndarray:
        return self.beams[i, j]


def dominant_eigenmode(h: np.ndarray) -> BeamformingVector:
    """Right singular vector of ``h^T`` for its only non-zero singular value.

    For a single row this is ``conj(h)/||h||`` (global phase is irrelevant
    to every downstream use).
    """
    h = np.asarray(h, dtype=complex)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("dominant_eigenmode: channel is identically zero")
    v = h.conj() / norm
    return BeamformingVector(v, PrecodingCase.CASE1_SVD)


def dominant_eigenmodes(h: np.ndarray) -> np.ndarray:
    """Row-wise :func:`dominant_eigenmode` for a ``(T, M)`` batch."""
    norms = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("dominant_eigenmodes: zero channel in batch")
    return h.conj() / norms


def build_codebook(geometry: ArrayGeometry, step: float = np.pi / 36,
                   max_elevation: float = np.pi / 2) -> Codebook:
    n_az = int(round(2 * np.pi / step)) + 1
    n_el = int(round(max_elevation / step)) + 1
    az = -np.pi + step * np.arange(n_az)
    el = step * np.arange(n_el)
    beams = steering_matrix(geometry, az[:, None], el[None, :])
    return Codebook(az, el, beams)


def select_codeword(v1: np.ndarray, codebook: Codebook,
                    rtol: float = 1e-12) -> BeamformingVector:
    """Codeword maximising ``|a^H v1|``; near-ties go to the lowest (i, j)."""
    corr = np.abs(codebook.beams.conj() @ np.asarray(v1, dtype=complex))
    flat = corr.ravel()
    best = flat.max()
    k = int(np.flatnonzero(flat >= best * (1 - rtol))[0])
    i, j = np.unravel_index(k, corr.shape)
    return BeamformingVector(codebook.beams[i, j], PrecodingCase.CASE2_CODEBOOK,
                             (int(i), int(j)),
                             (float(codebook.azimuths[i]), float(codebook.elevations[j])))


def leakage_ratios(sub_channels: np.ndarray, steering: np.ndarray) -> np.ndarray:
    """``|h_c^T a_c| / |(sum_{i!=c} h_i)^T a_c|`` for every sub-channel ``c``.

    A zero denominator with a non-zero numerator counts as perfect isolation
    (``inf``); 0/0 counts as 0.
    """
    total = sub_channels.sum(axis=0)
    own = np.abs(np.einsum("cm,cm->c", sub_channels, steering))
    rest = np.abs(np.einsum("cm,cm->c", total[None, :] - sub_channels, steering))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = own / rest
    ratio[(rest == 0) & (own > 0)] = np.inf
    ratio[(rest == 0) & (own == 0)] = 0.0
    return ratio


def partial_csi_direction(channel: RisUeChannel,
                          geometry: ArrayGeometry) -> BeamformingVector:
    dirs = channel.directions
    steering = steering_matrix(geometry, dirs[:, 0], dirs[:, 1])
    ratio = leakage_ratios(channel.sub_channels, steering)
    c = int(np.argmax(ratio))  # first maximum wins ties
    return BeamformingVector(steering[c], PrecodingCase.CASE3_PARTIAL,
                             direction=(float(dirs[c, 0]), float(dirs[c, 1])))


def beamforming_vector(case: PrecodingCase, channel: RisUeChannel,
                       geometry: ArrayGeometry,
                       codebook: Codebook | None = None) -> BeamformingVector:
    case = PrecodingCase(case)
    if case is PrecodingCase.CASE1_SVD:
        return dominant_eigenmode(channel.h)
    if case is PrecodingCase.CASE2_CODEBOOK:
        if codebook is None:
            codebook = build_codebook(geometry)
        return select_codeword(dominant_eigenmode(channel.h).b, codebook)
    return partial_csi_direction(channel, geometry)
