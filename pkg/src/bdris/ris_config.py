"""Scattering-matrix synthesis for BD-RIS, D-RIS and the active-array benchmark.

The BD-RIS path is the Takagi-based block construction: for every group the
normalised feed sub-vector ``u_q`` is mapped onto the normalised beamforming
sub-vector ``v_q`` by a symmetric unitary block ``Omega_q = Q_q Q_q^T``.
All kernels accept a leading batch dimension so Monte-Carlo engines can
configure many trials per LAPACK call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import ArrayGeometry


class GroupingStrategy(enum.Enum):
    LINEAR = "linear"
    ROWS = "rows"
    MIRROR_SYMMETRIC = "mirror"


class Architecture(enum.Enum):
    ACTIVE = "active"
    DRIS = "dris"
    BD_FULL = "bd_full"
    BD_GROUP = "bd_group"


class ScatteringKind(enum.Enum):
    BD_BLOCK_UNITARY = "bd"
    DIAGONAL_PHASE = "diagonal"


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grouping:
    size: int
    groups: tuple[np.ndarray, ...]
    strategy: GroupingStrategy

    def __post_init__(self):
        flat = np.concatenate(self.groups)
        if flat.size != self.size or not np.array_equal(np.sort(flat), np.arange(self.size)):
            raise ValueError("groups must partition the cell indices 0..M-1")
        sizes = {len(g) for g in self.groups}
        if len(sizes) != 1:
            raise ValueError(f"groups must have equal sizes, got {sorted(sizes)}")

    @property
    def group_count(self) -> int:
        return len(self.groups)

    @property
    def group_size(self) -> int:
        return self.size // self.group_count

    @property
    def permutation(self) -> np.ndarray:
        """Cell order that makes the scattering matrix block diagonal."""
        return np.concatenate(self.groups)


def _reflections(geometry: ArrayGeometry):
    m = np.arange(geometry.size)
    mx, my = geometry.m_x, geometry.m_y
    Mx, My = geometry.m_x_count, geometry.m_y_count
    return {
        "point": geometry.size - 1 - m,
        "x": my * Mx + (Mx - 1 - mx),
        "y": (My - 1 - my) * Mx + mx,
    }


def _mirror_split(group: np.ndarray, reflections) -> tuple[np.ndarray, np.ndarray]:
    members = set(group.tolist())
    for mirror in reflections.values():
        image = mirror[group]
        if set(image.tolist()) == members and np.all(image != group):
            first = np.sort(group[group < image])
            return first, np.sort(mirror[first])
    raise ValueError(f"group {group.tolist()} has no fixed-point-free mirror symmetry")


def make_grouping(geometry: ArrayGeometry, group_count: int,
                  strategy: GroupingStrategy = GroupingStrategy.LINEAR,
                  base: GroupingStrategy = GroupingStrategy.LINEAR) -> Grouping:
    """Partition the cells into ``group_count`` equal groups.

    ``MIRROR_SYMMETRIC`` builds ``group_count/2`` groups with ``base`` and
    splits each into two halves that are mirror images of each other under
    a reflection of the array that preserves the feed distances (point
    reflection through the centre, or flips along x / y).
    """
    strategy = GroupingStrategy(strategy)
    M = geometry.size
    G = int(group_count)
    if G < 1 or M % G:
        raise ValueError(f"group count {group_count} does not divide M={M}")

    if strategy is GroupingStrategy.LINEAR:
        groups = tuple(np.arange(M).reshape(G, M // G))
    elif strategy is GroupingStrategy.ROWS:
        if geometry.m_y_count % G:
            raise ValueError(f"ROWS grouping needs G dividing M_y={geometry.m_y_count}, got {G}")
        groups = tuple(np.arange(M).reshape(G, M // G))
    else:
        if G % 2:
            raise ValueError(f"MIRROR_SYMMETRIC grouping needs an even G, got {G}")
        if GroupingStrategy(base) is GroupingStrategy.MIRROR_SYMMETRIC:
            raise ValueError("base grouping cannot itself be MIRROR_SYMMETRIC")
        parent = make_grouping(geometry, G // 2, base)
        refl = _reflections(geometry)
        groups = tuple(half for grp in parent.groups for half in _mirror_split(grp, refl))
    return Grouping(M, tuple(np.asarray(g, dtype=int) for g in groups), strategy)


def takagi(A: np.ndarray, rtol: float = 1e-9):
    """Takagi factorisation ``A = Q diag(s) Q^T`` of complex symmetric matrices.

    SVD ``A = U S V^H``, then ``Q = U diag(exp(j*angle(diag(U^H V*))/2))``.
    Inside a cluster of repeated non-zero singular values the per-column
    phase fix is not enough (``U^H V*`` is a full symmetric unitary block
    there), so the block's principal square root is used instead. Works on
    stacks ``(..., n, n)``.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"takagi: expected square matrices, got shape {A.shape}")
    asym = np.linalg.norm(A - np.swapaxes(A, -1, -2), axis=(-2, -1))
    scale = np.linalg.norm(A, axis=(-2, -1))
    if np.any(asym > 1e-9 * np.maximum(scale, np.finfo(float).tiny)):
        raise ValueError("takagi: input matrix is not symmetric")

    batch, n = A.shape[:-2], A.shape[-1]
    U, s, Vh = np.linalg.svd(A.reshape((-1, n, n)))
    Vconj = np.swapaxes(Vh, -1, -2)  # V* = (V^H)^T
    nu = np.einsum("kij,kij->kj", U.conj(), Vconj)
    Q = U * np.exp(0.5j * np.angle(nu))[:, None, :]

    if n > 1:
        tiny = np.finfo(float).tiny
        top = np.maximum(s[:, :1], tiny)
        repeated = np.abs(np.diff(s, axis=-1)) <= rtol * top
        nonzero = s[:, 1:] > rtol * top
        for k in np.flatnonzero(np.any(repeated & nonzero, axis=-1)):
            Q[k] = _takagi_clustered(U[k], s[k], Vconj[k], rtol)
    return Q.reshape(batch + (n, n)), s.reshape(batch + (n,))


def _takagi_clustered(U, s, Vconj, rtol):
    n = s.size
    Q = U.astype(complex).copy()
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(s[stop] - s[start]) <= rtol * max(s[0], np.finfo(float).tiny):
            stop += 1
        cols = slice(start, stop)
        if s[start] > rtol * s[0]:
            Z = U[:, cols].conj().T @ Vconj[:, cols]
            Q[:, cols] = U[:, cols] @ scipy.linalg.sqrtm(Z)
        start = stop
    return Q


def _block_configuration(gq: np.ndarray, aq: np.ndarray) -> np.ndarray:
    """Symmetric unitary blocks mapping ``gq/|gq|`` onto ``aq/|aq|``; batched."""
    g_norm = np.linalg.norm(gq, axis=-1, keepdims=True)
    a_norm = np.linalg.norm(aq, axis=-1, keepdims=True)
    u = gq / g_norm
    v = aq / a_norm
    X = v[..., :, None] * u.conj()[..., None, :]
    Aq = X + np.swapaxes(X, -1, -2)
    Q, _ = takagi(Aq)
    return Q @ np.swapaxes(Q, -1, -2)


def _block_effective_reduced(gq: np.ndarray, aq: np.ndarray) -> np.ndarray:
    """``Omega_q g_q`` from the Takagi factors of ``A_q`` restricted to its range.

    ``A_q = v u^H + u* v^T`` has rank <= 2 and its range contains ``u*``, so
    Takagi vectors of zero singular values satisfy ``q^T u = 0`` and drop out
    of ``Omega_q g_q``. Factorising the 2x2 core ``W^H A_q W*`` on an
    orthonormal basis ``W`` of ``span{v, u*}`` therefore gives the same
    effective vector as the full block at a fraction of the cost.
    """
    u = gq / np.linalg.norm(gq, axis=-1, keepdims=True)
    v = aq / np.linalg.norm(aq, axis=-1, keepdims=True)
    W, _ = np.linalg.qr(np.stack([v, u.conj()], axis=-1))  # (..., n, k)
    p = np.einsum("...ik,...i->...k", W.conj(), v)
    r = np.einsum("...ik,...i->...k", W.conj(), u.conj())
    X = p[..., :, None] * r[..., None, :]
    Qc, _ = takagi(X + np.swapaxes(X, -1, -2))
    Q2 = W @ Qc
    return np.einsum("...ik,...k->...i", Q2, np.einsum("...ik,...i->...k", Q2, gq))


def _check_groups(g, b, grouping: Grouping):
    for q, idx in enumerate(grouping.groups):
        if np.any(np.linalg.norm(g[..., idx], axis=-1) == 0):
            raise DegenerateInputError(f"feed sub-vector of group {q} is zero")
        if np.any(np.linalg.norm(b[..., idx], axis=-1) == 0):
            raise DegenerateInputError(f"beamforming sub-vector of group {q} is zero")


def _coherence_phases(zetas, b, grouping, tol):
    """Per-group common phase that cancels residual inter-group offsets."""
    psi = np.stack([np.angle(np.einsum("...i,...i->...", b[..., idx].conj(), z))
                    for z, idx in zip(zetas, grouping.groups)], axis=-1)
    rel = np.angle(np.exp(1j * (psi - psi[..., :1])))
    spread = rel.max(axis=-1) - rel.min(axis=-1)
    return np.where((spread > tol)[..., None], np.exp(-1j * psi), 1.0)


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    kind: ScatteringKind
    grouping: Grouping | None
    blocks: tuple[np.ndarray, ...] = ()
    phases: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.grouping.size if self.grouping is not None else self.phases.size

    def matrix(self) -> np.ndarray:
        if self.kind is ScatteringKind.DIAGONAL_PHASE:
            return np.diag(self.phases)
        M = self.size
        omega = np.zeros((M, M), dtype=complex)
        for idx, blk in zip(self.grouping.groups, self.blocks):
            omega[np.ix_(idx, idx)] = blk
        return omega

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.kind is ScatteringKind.DIAGONAL_PHASE:
            return self.phases * x
        out = np.empty(self.size, dtype=complex)
        for idx, blk in zip(self.grouping.groups, self.blocks):
            out[idx] = blk @ x[idx]
        return out


def configure_bdris(g: np.ndarray, b: np.ndarray, grouping: Grouping,
                    phase_tol: float = 1e-6) -> ScatteringMatrix:
    """Group-connected scattering matrix steering the feed channel ``g`` along ``b``."""
    g = np.asarray(g, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_groups(g, b, grouping)
    blocks = [_block_configuration(g[idx], b[idx]) for idx in grouping.groups]
    zetas = [blk @ g[idx] for blk, idx in zip(blocks, grouping.groups)]
    fix = _coherence_phases(zetas, b, grouping, phase_tol)
    blocks = tuple(blk * f for blk, f in zip(blocks, fix))
    return ScatteringMatrix(ScatteringKind.BD_BLOCK_UNITARY, grouping, blocks=blocks)


def bdris_effective_vectors(g: np.ndarray, B: np.ndarray, grouping: Grouping,
                            phase_tol: float = 1e-6, chunk: int = 256,
                            method: str = "reduced") -> np.ndarray:
    """``zeta = Omega(b) g`` for every row of ``B``.

    ``method="full"`` factorises every ``M/G x M/G`` block as
    :func:`configure_bdris` does; ``"reduced"`` factorises only the rank-2
    core of each block (same ``zeta``, much cheaper for large groups).
    """
    if method not in ("full", "reduced"):
        raise ValueError(f"unknown method {method!r}")
    g = np.asarray(g, dtype=complex)
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    _check_groups(g, B, grouping)
    out = np.empty(B.shape, dtype=complex)
    for lo in range(0, B.shape[0], chunk):
        Bc = B[lo:lo + chunk]
        gc = np.broadcast_to(g, Bc.shape)
        if method == "full":
            zetas = [np.einsum("tij,tj->ti", _block_configuration(gc[:, idx], Bc[:, idx]),
                               gc[:, idx]) for idx in grouping.groups]
        else:
            zetas = [_block_effective_reduced(gc[:, idx], Bc[:, idx])
                     for idx in grouping.groups]
        fix = _coherence_phases(zetas, Bc, grouping, phase_tol)
        for q, (idx, z) in enumerate(zip(grouping.groups, zetas)):
            out[lo:lo + chunk, idx] = fix[:, q:q + 1] * z
    return out


def configure_dris(g: np.ndarray, b: np.ndarray) -> ScatteringMatrix:
    """Phase-only diagonal ``diag(exp(-j*angle(g * conj(b))))``."""
    g = np.asarray(g, dtype=complex)
    if np.any(g == 0):
        raise DegenerateInputError("configure_dris: feed channel has zero entries")
    return ScatteringMatrix(ScatteringKind.DIAGONAL_PHASE, None,
                            phases=np.exp(-1j * np.angle(g * np.conj(b))))


def dris_effective_vectors(g: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.abs(g) * np.exp(1j * np.angle(B))


def active_array_weights(v1: np.ndarray) -> np.ndarray:
    """Constant-modulus analog weights ``exp(j*angle(v1))`` (angle(0) = 0)."""
    return np.exp(1j * np.angle(v1))


def active_effective_vectors(B: np.ndarray) -> np.ndarray:
    """Active-array radiated vector with total power normalised to one."""
    B = np.asarray(B)
    return active_array_weights(B) / np.sqrt(B.shape[-1])


@dataclass(frozen=True)
class ComplexityReport:
    architecture: Architecture
    circuit_count: int
    algo_flop_model: float


def circuit_complexity(architecture: Architecture, M: int, G: int = 1) -> ComplexityReport:
    architecture = Architecture(architecture)
    if M < 1:
        raise ValueError("M must be >= 1")
    if architecture is Architecture.ACTIVE:
        return ComplexityReport(architecture, M, float(M))
    if architecture is Architecture.DRIS:
        return ComplexityReport(architecture, 3 * M, float(M))
    if architecture is Architecture.BD_FULL:
        return ComplexityReport(architecture, (2 * M + 1) * M, float(M) ** 3)
    if G < 1 or M % G:
        raise ValueError(f"G={G} must divide M={M}")
    return ComplexityReport(architecture, (2 * M // G + 1) * M, G * (M / G) ** 3)


def relative_complexity(M: int, group_counts) -> list[dict]:
    """Group-connected complexity relative to the other architectures."""
    full = circuit_complexity(Architecture.BD_FULL, M)
    dris = circuit_complexity(Architecture.DRIS, M)
    active = circuit_complexity(Architecture.ACTIVE, M)
    rows = []
    for G in group_counts:
        grp = circuit_complexity(Architecture.BD_GROUP, M, G)
        rows.append({
            "G": G,
            "circuit_gbd": grp.circuit_count,
            "circuit_vs_full": grp.circuit_count / full.circuit_count,
            "circuit_vs_dris": grp.circuit_count / dris.circuit_count,
            "circuit_vs_active": grp.circuit_count / active.circuit_count,
            "algo_vs_full": grp.algo_flop_model / full.algo_flop_model,
            "algo_vs_dris": grp.algo_flop_model / dris.algo_flop_model,
        })
    return rows
