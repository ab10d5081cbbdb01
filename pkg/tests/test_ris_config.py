import numpy as np
import pytest
from hypothesis import given, strategies as st

from bdris.channel import bs_ris_channel
from bdris.geometry import steering_matrix
from bdris.metrics import cav
from bdris.precoder import dominant_eigenmode
from bdris.ris_config import (Architecture, DegenerateInputError, Grouping, GroupingStrategy,
                              ScatteringKind, active_array_weights, active_effective_vectors,
                              bdris_effective_vectors, circuit_complexity, configure_bdris,
                              configure_dris, dris_effective_vectors, make_grouping,
                              relative_complexity, takagi)

from conftest import make_geometry

L, R, S = GroupingStrategy.LINEAR, GroupingStrategy.ROWS, GroupingStrategy.MIRROR_SYMMETRIC


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------- Takagi

def test_takagi_identity():
    Q, s = takagi(np.eye(4))
    np.testing.assert_allclose(s, 1.0)
    np.testing.assert_allclose(Q @ Q.T, np.eye(4), atol=1e-12)


def test_takagi_diagonal():
    Q, s = takagi(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(s, [2, 1])
    np.testing.assert_allclose(np.abs(np.diag(Q)), 1.0, atol=1e-12)
    np.testing.assert_allclose(Q - np.diag(np.diag(Q)), 0, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_takagi_reconstruction(seed, n):
    rng = np.random.default_rng(seed)
    B = crandn(rng, n, n)
    A = B + B.T
    Q, s = takagi(A)
    assert np.linalg.norm(A - Q @ np.diag(s) @ Q.T) / np.linalg.norm(A) < 1e-9
    assert np.linalg.norm(Q.conj().T @ Q - np.eye(n)) < 1e-10


def test_takagi_repeated_singular_values(rng):
    # u, v orthogonal gives A with a doubly repeated singular value
    u = np.zeros(6, complex)
    v = np.zeros(6, complex)
    u[0], v[1] = 1, 1j
    X = np.outer(v, u.conj())
    A = X + X.T
    Q, s = takagi(A)
    np.testing.assert_allclose(Q @ np.diag(s) @ Q.T, A, atol=1e-12)
    np.testing.assert_allclose(Q.conj().T @ Q, np.eye(6), atol=1e-12)


def test_takagi_batched(rng):
    B = crandn(rng, 3, 2, 5, 5)
    A = B + np.swapaxes(B, -1, -2)
    Q, s = takagi(A)
    assert Q.shape == (3, 2, 5, 5) and s.shape == (3, 2, 5)
    recon = np.einsum("...ik,...k,...jk->...ij", Q, s, Q)
    np.testing.assert_allclose(recon, A, atol=1e-12)


def test_takagi_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        takagi(crandn(rng, 3, 4))
    with pytest.raises(ValueError):
        takagi(crandn(rng, 3, 3))


# ---------------------------------------------------------------- grouping

def test_linear_groupings():
    assert [list(g) for g in make_grouping(make_geometry(2, 2), 1).groups] == [[0, 1, 2, 3]]
    grp = make_grouping(make_geometry(6, 6), 9)
    assert [list(g) for g in grp.groups] == [list(range(4 * q, 4 * q + 4)) for q in range(9)]


@pytest.mark.parametrize("G, strategy, base", [(1, L, L), (4, L, L), (20, L, L), (10, R, L),
                                               (2, S, L), (20, S, R), (4, S, L)])
def test_groupings_partition(G, strategy, base, geometry):
    grp = make_grouping(geometry, G, strategy, base)
    flat = np.sort(np.concatenate(grp.groups))
    np.testing.assert_array_equal(flat, np.arange(100))
    assert grp.group_count == G and all(len(g) == 100 // G for g in grp.groups)
    np.testing.assert_array_equal(np.sort(grp.permutation), np.arange(100))


def test_mirror_halves_share_distance_multisets(geometry):
    grp = make_grouping(geometry, 20, S, R)
    d = np.round(geometry.d_m / geometry.d_c, 12)
    for a, b in zip(grp.groups[0::2], grp.groups[1::2]):
        np.testing.assert_array_equal(np.sort(d[a]), np.sort(d[b]))
        assert len(set(a) & set(b)) == 0


def test_mirror_two_group_split_matches_full_multiset(geometry):
    grp = make_grouping(geometry, 2, S, L)
    d = np.round(geometry.d_m / geometry.d_c, 12)
    full_values, full_counts = np.unique(d, return_counts=True)
    for idx in grp.groups:
        values, counts = np.unique(d[idx], return_counts=True)
        np.testing.assert_array_equal(values, full_values)
        np.testing.assert_array_equal(2 * counts, full_counts)


def test_mirror_halves_keep_group_cav(geometry, feed):
    for G, base in ((2, L), (20, R)):
        grp = make_grouping(geometry, G, S, base)
        parent = make_grouping(geometry, G // 2, base)
        for k, idx in enumerate(grp.groups):
            ref = cav(feed[parent.groups[k // 2]]).cav
            assert cav(feed[idx]).cav == pytest.approx(ref, rel=1e-12)


def test_grouping_errors(geometry):
    with pytest.raises(ValueError, match="divide"):
        make_grouping(geometry, 7)
    with pytest.raises(ValueError):
        make_grouping(geometry, 5, S)
    with pytest.raises(ValueError):
        make_grouping(make_geometry(4, 3), 4, R)
    with pytest.raises(ValueError, match="mirror"):
        make_grouping(geometry, 50, S, L)
    with pytest.raises(ValueError):
        Grouping(4, (np.array([0, 1]), np.array([1, 2])), L)
    with pytest.raises(ValueError):
        Grouping(4, (np.array([0]), np.array([1, 2, 3])), L)


# ---------------------------------------------------------------- BD-RIS

def assert_bd_invariants(omega_matrix, g, b, grouping):
    M = g.size
    assert np.linalg.norm(omega_matrix.conj().T @ omega_matrix - np.eye(M)) < 1e-9 * np.sqrt(M)
    assert np.linalg.norm(omega_matrix - omega_matrix.T) < 1e-9 * np.sqrt(M)
    zeta = omega_matrix @ g
    assert np.linalg.norm(zeta) == pytest.approx(np.linalg.norm(g), rel=1e-10)
    for idx in grouping.groups:
        lhs = abs(np.vdot(b[idx], zeta[idx]))
        assert lhs == pytest.approx(np.linalg.norm(b[idx]) * np.linalg.norm(g[idx]), rel=1e-8)
        # no cross-group coupling
        outside = np.setdiff1d(np.arange(M), idx)
        assert np.all(omega_matrix[np.ix_(idx, outside)] == 0)


@pytest.mark.parametrize("G, strategy, base", [(1, L, L), (4, L, L), (10, R, L), (20, S, R),
                                               (100, L, L)])
def test_configure_bdris_invariants(G, strategy, base, geometry, feed, rng):
    grouping = make_grouping(geometry, G, strategy, base)
    b = crandn(rng, 100)
    omega = configure_bdris(feed, b, grouping)
    assert omega.kind is ScatteringKind.BD_BLOCK_UNITARY
    assert_bd_invariants(omega.matrix(), feed, b, grouping)
    np.testing.assert_allclose(omega.apply(feed), omega.matrix() @ feed, atol=1e-14)


def test_groups_combine_coherently(geometry, feed, rng):
    grouping = make_grouping(geometry, 4)
    b = crandn(rng, 100)
    zeta = configure_bdris(feed, b, grouping).apply(feed)
    phases = [np.angle(np.vdot(b[idx], zeta[idx])) for idx in grouping.groups]
    np.testing.assert_allclose(np.exp(1j * np.array(phases)), np.exp(1j * phases[0]), atol=1e-6)


def test_single_cell_groups_are_unimodular(geometry, feed, rng):
    omega = configure_bdris(feed, crandn(rng, 100), make_grouping(geometry, 100))
    for blk in omega.blocks:
        assert blk.shape == (1, 1)
        assert abs(blk[0, 0]) == pytest.approx(1.0, abs=1e-12)


def test_matched_full_connection_attains_cauchy_schwarz(geometry, feed, rng):
    h = crandn(rng, 100)
    v1 = dominant_eigenmode(h).b
    zeta = configure_bdris(feed, v1, make_grouping(geometry, 1)).apply(feed)
    assert abs(h @ zeta) == pytest.approx(np.linalg.norm(h) * np.linalg.norm(feed), rel=1e-8)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, L, L), (5, L, L), (2, S, L), (20, S, R)]))
def test_bdris_collinearity_property(seed, spec):
    geo = make_geometry()
    g = bs_ris_channel(geo)
    rng = np.random.default_rng(seed)
    b = crandn(rng, 100)
    grouping = make_grouping(geo, *spec)
    assert_bd_invariants(configure_bdris(g, b, grouping).matrix(), g, b, grouping)


@pytest.mark.parametrize("G, strategy, base", [(1, L, L), (4, L, L), (20, S, R), (100, L, L)])
def test_batched_routes_agree_with_matrix(G, strategy, base, geometry, feed, rng):
    grouping = make_grouping(geometry, G, strategy, base)
    B = crandn(rng, 12, 100)
    reduced = bdris_effective_vectors(feed, B, grouping)
    full = bdris_effective_vectors(feed, B, grouping, method="full", chunk=5)
    direct = np.stack([configure_bdris(feed, b, grouping).apply(feed) for b in B])
    np.testing.assert_allclose(reduced, direct, atol=1e-12)
    np.testing.assert_allclose(full, direct, atol=1e-12)


def test_batched_route_handles_aligned_inputs(geometry, feed):
    grouping = make_grouping(geometry, 1)
    for b in (feed.conj(), feed.copy()):
        z = bdris_effective_vectors(feed, b, grouping)[0]
        direct = configure_bdris(feed, b, grouping).apply(feed)
        np.testing.assert_allclose(z, direct, atol=1e-12)


def test_bdris_degenerate_inputs(geometry, feed):
    grouping = make_grouping(geometry, 4)
    b = np.ones(100, complex)
    b[:25] = 0
    with pytest.raises(DegenerateInputError):
        configure_bdris(feed, b, grouping)
    with pytest.raises(ValueError):
        bdris_effective_vectors(feed, np.ones(100), grouping, method="exact")


def test_mirror_two_groups_radiate_like_full(geometry, feed):
    b = steering_matrix(geometry, 0.0, 0.0)
    z1 = configure_bdris(feed, b, make_grouping(geometry, 1)).apply(feed)
    z2 = configure_bdris(feed, b, make_grouping(geometry, 2, S, L)).apply(feed)
    angles = steering_matrix(geometry, np.linspace(-np.pi, np.pi, 37)[:, None],
                             np.linspace(0, np.pi / 2, 10)[None, :])
    p1 = np.abs(angles @ z1) ** 2
    p2 = np.abs(angles @ z2) ** 2
    np.testing.assert_allclose(p2, p1, rtol=1e-9, atol=1e-9 * p1.max())


# ---------------------------------------------------------------- D-RIS and active

def test_dris_trivial_configuration():
    g = np.array([0.5, 2.0, 1.0])
    omega = configure_dris(g, np.ones(3))
    np.testing.assert_allclose(omega.matrix(), np.eye(3), atol=1e-15)


def test_dris_is_unimodular_diagonal(feed, rng):
    omega = configure_dris(feed, crandn(rng, 100))
    m = omega.matrix()
    np.testing.assert_allclose(np.abs(np.diag(m)), 1.0, atol=1e-12)
    assert np.all(m[~np.eye(100, dtype=bool)] == 0)
    assert omega.kind is ScatteringKind.DIAGONAL_PHASE


def test_dris_aligned_phase_sum(feed, rng):
    v1 = dominant_eigenmode(crandn(rng, 100)).b
    sigma = 3.7
    h = sigma * v1.conj()
    got = abs(h @ configure_dris(feed, v1).apply(feed))
    assert got == pytest.approx(sigma * np.sum(np.abs(v1) * np.abs(feed)), rel=1e-12)
    np.testing.assert_allclose(dris_effective_vectors(feed, v1[None])[0],
                               configure_dris(feed, v1).apply(feed), atol=1e-15)


def test_active_weights(rng):
    np.testing.assert_allclose(active_array_weights(np.array([0.2, 3.0])), [1, 1])
    v = crandn(rng, 50)
    w = active_array_weights(v)
    np.testing.assert_allclose(np.abs(w), 1.0, atol=1e-15)
    np.testing.assert_allclose(np.angle(w), np.angle(v), atol=1e-15)
    assert np.linalg.norm(active_effective_vectors(v[None])[0]) == pytest.approx(1.0)


# ---------------------------------------------------------------- complexity

def test_circuit_counts():
    assert circuit_complexity(Architecture.BD_FULL, 100).circuit_count == 20100
    assert circuit_complexity(Architecture.BD_GROUP, 100, 10).circuit_count == 2100
    assert circuit_complexity(Architecture.DRIS, 100).circuit_count == 300
    assert circuit_complexity(Architecture.ACTIVE, 100).circuit_count == 100
    assert circuit_complexity(Architecture.BD_GROUP, 100, 100).circuit_count == 300
    with pytest.raises(ValueError):
        circuit_complexity(Architecture.BD_GROUP, 100, 7)


def test_relative_complexity_anchor():
    row = relative_complexity(100, [10])[0]
    assert row["circuit_vs_full"] == pytest.approx(2100 / 20100)
    assert round(row["circuit_vs_full"], 3) == 0.104


def test_circuit_count_strictly_decreasing_in_groups():
    counts = [circuit_complexity(Architecture.BD_GROUP, 100, G).circuit_count
              for G in (1, 2, 4, 5, 10, 20, 25, 50, 100)]
    assert all(a > b for a, b in zip(counts, counts[1:]))
