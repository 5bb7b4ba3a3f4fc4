import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pairex import kernelalg as ka
from pairex.errors import ChartError, GridMismatchError, SymmetryError
from pairex.grid import make_grid

from oracles import naive_compose, random_symmetric, scaled_kernel, series_sh_ch, unit_vector

G = make_grid(1, 12, 3.0)
W = G.cell_volume
N = G.total_points


def rank_one(lam, u):
    return lam * np.outer(u, u)


def test_compose_identity_and_projection(rng):
    a = random_symmetric(rng, N)
    np.testing.assert_allclose(ka.compose(ka.identity_kernel(G), a, G), a, atol=1e-13)
    u = unit_vector(N, W)
    p = np.outer(u, u)
    np.testing.assert_allclose(ka.compose(p, p, G), p, atol=1e-13)


def test_compose_against_loop(rng):
    a = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    b = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    ref = naive_compose(a, b, W)
    assert np.linalg.norm(ka.compose(a, b, G) - ref) <= 1e-13 * np.linalg.norm(ref)
    with pytest.raises(GridMismatchError):
        ka.compose(a[:4, :4], b[:4, :4], G)


def test_op_norm_matches_dense(rng):
    a = random_symmetric(rng, N)
    assert ka.op_norm(a, G) == pytest.approx(W * np.linalg.norm(a, 2), rel=1e-9)
    assert ka.op_norm(np.zeros((N, N)), G) == 0.0


def test_takagi_examples(rng):
    _, s = ka.takagi(np.zeros((N, N), dtype=complex), G)
    assert np.all(s == 0)
    u = unit_vector(N, W)
    _, s = ka.takagi(rank_one(0.8, u), G)
    assert s[0] == pytest.approx(0.8, abs=1e-13)
    assert np.all(np.abs(s[1:]) < 1e-13)
    a = random_symmetric(rng, N)
    uu, s = ka.takagi(a, G)
    np.testing.assert_allclose(s, np.linalg.svd(W * a, compute_uv=False), atol=1e-12)
    assert np.all(np.diff(s) <= 0)
    with pytest.raises(SymmetryError):
        ka.takagi(a + np.triu(np.ones((N, N)), 1), G)


def test_takagi_degenerate_spectrum(rng):
    q, _ = np.linalg.qr(rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
    sigma = np.array([2.0, 2.0, 2.0, 1.0, 1.0] + [0.5] * 4 + [0.0] * 3)
    op = (q * sigma) @ q.T
    u, s = ka.takagi_matrix(op)
    np.testing.assert_allclose(s, sigma, atol=1e-12)
    np.testing.assert_allclose(u @ np.diag(s) @ u.T, op, atol=1e-12)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(N), atol=1e-12)


def test_sh_ch_examples(rng):
    sh, ch = ka.sh_ch_from_k(np.zeros((N, N), dtype=complex), G)
    assert np.abs(sh).max() == 0
    np.testing.assert_allclose(ch, ka.identity_kernel(G), atol=1e-14)
    u = unit_vector(N, W)
    lam = 0.7
    sh, ch = ka.sh_ch_from_k(rank_one(lam, u), G)
    np.testing.assert_allclose(W * sh, W * math.sinh(lam) * np.outer(u, u), atol=1e-13)
    np.testing.assert_allclose(W * ch, np.eye(N) + W * (math.cosh(lam) - 1) * np.outer(u, u), atol=1e-13)
    k = scaled_kernel(rng, N, W, 0.4)
    sh, ch = ka.sh_ch_from_k(k, G)
    sh_s, ch_s = series_sh_ch(k, W, terms=12)
    assert W * np.abs(sh - sh_s).max() < 1e-12
    assert W * np.abs(ch - ch_s).max() < 1e-12


def test_series_reference_large_norm(rng):
    k = scaled_kernel(rng, N, W, 2.5)
    sh, ch = ka.sh_ch_from_k(k, G)
    sh_s, ch_s = ka.sh_ch_series(k, G)
    assert W * np.abs(sh - sh_s).max() < 1e-11
    assert W * np.abs(ch - ch_s).max() < 1e-11


def test_zeta_chart(rng):
    np.testing.assert_array_equal(ka.zeta_from_k(np.zeros((N, N), dtype=complex), G), 0)
    u = unit_vector(N, W)
    z = ka.zeta_from_k(rank_one(1.1, u), G)
    np.testing.assert_allclose(W * z, W * math.tanh(1.1) * np.outer(u, u), atol=1e-13)
    sh, ch = ka.sh_ch_from_k(rank_one(1.1, u), G)
    np.testing.assert_allclose(ka.compose(ch.conj(), z, G), sh, atol=1e-12)
    k = scaled_kernel(rng, N, W, 1.3)
    assert W * np.abs(ka.k_from_zeta(ka.zeta_from_k(k, G), G) - k).max() < 1e-10
    with pytest.raises(ChartError):
        ka.k_from_zeta(scaled_kernel(rng, N, W, 1.0 - 1e-7), G)
    with pytest.raises(ChartError):
        ka.PairState(scaled_kernel(rng, N, W, 1.2), G)


def test_pair_state_matches_takagi_route(rng):
    k = scaled_kernel(rng, N, W, 0.9)
    pair = ka.PairState.from_k(k, G)
    sh, ch = ka.sh_ch_from_k(k, G)
    np.testing.assert_allclose(W * pair.sh, W * sh, atol=1e-12)
    np.testing.assert_allclose(W * pair.ch, W * ch, atol=1e-12)
    sh2, ch2 = ka.sh_ch_from_k(2 * k, G)
    np.testing.assert_allclose(W * pair.sh2k, W * sh2, atol=1e-10)
    np.testing.assert_allclose(W * pair.ch2k, W * ch2, atol=1e-10)
    np.testing.assert_allclose(W * pair.k, W * k, atol=1e-10)


def test_doubled_kernels(rng):
    zero = ka.PairState.vacuum(G)
    s2, c2 = ka.doubled_kernels(zero)
    assert np.abs(s2).max() == 0
    np.testing.assert_allclose(c2, ka.identity_kernel(G))
    u = unit_vector(N, W)
    s2, _ = ka.doubled_kernels(ka.PairState.from_k(rank_one(0.6, u), G))
    np.testing.assert_allclose(W * s2, W * math.sinh(1.2) * np.outer(u, u), atol=1e-12)
    pair = ka.PairState(scaled_kernel(rng, N, W, 0.8), G)
    s2, c2 = ka.doubled_kernels(pair)
    lhs = ka.compose(pair.zeta, ka.identity_kernel(G) + c2, G)
    assert W * np.abs(lhs - s2).max() < 1e-10


def test_pair_state_tangent_against_finite_difference(rng):
    pair = ka.PairState(scaled_kernel(rng, N, W, 0.7), G)
    d = random_symmetric(rng, N)
    dsh, dch = pair.tangent(d)
    eps = 1e-6
    plus = ka.PairState(pair.zeta + eps * d, G, check=False)
    minus = ka.PairState(pair.zeta - eps * d, G, check=False)
    np.testing.assert_allclose(dsh, (plus.sh - minus.sh) / (2 * eps), atol=1e-7 * np.abs(dsh).max())
    np.testing.assert_allclose(dch, (plus.ch - minus.ch) / (2 * eps), atol=1e-7 * np.abs(dch).max())


def test_bogoliubov_examples(rng):
    e = ka.bogoliubov_matrix(np.zeros((N, N), dtype=complex), G)
    np.testing.assert_allclose(e.operator(), np.eye(2 * N), atol=1e-14)
    assert max(ka.check_group_properties(e).values()) < 1e-14
    k = scaled_kernel(rng, N, W, 1.2)
    e = ka.bogoliubov_matrix(k, G)
    assert max(ka.check_group_properties(e).values()) < 1e-10
    lhs = ka.compose(e.top_left, e.top_left, G) - ka.compose(e.top_right, e.bottom_left, G)
    assert W * np.abs(lhs - ka.identity_kernel(G)).max() < 1e-10
    ref = ka.bogoliubov_exponential(k, G).operator()
    assert np.abs(e.operator() - ref).max() < 1e-10
    ez = ka.bogoliubov_from_zeta(ka.zeta_from_k(k, G), G).operator()
    assert np.abs(ez - ref).max() < 1e-9


def test_group_properties_detect_a_broken_matrix(rng):
    e = ka.bogoliubov_matrix(scaled_kernel(rng, N, W, 0.5), G)
    broken = ka.BogoliubovMatrix(e.top_left * 1.01, e.top_right, e.bottom_left, e.bottom_right, G)
    res = ka.check_group_properties(broken)
    assert res["sigma_reality"] > 1e-3 and res["unitary_nn"] > 1e-3


@pytest.mark.parametrize("kind", ["field", "symmetric", "self_adjoint", "general"])
def test_snapshot_round_trip(tmp_path, rng, kind):
    g = make_grid(2, 4, 1.5)
    shape = (16,) if kind == "field" else (16, 16)
    data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    path = tmp_path / "s.bin"
    ka.write_snapshot(path, data, g, kind)
    raw = path.read_bytes()
    assert raw[:8] == b"PAIREX01"
    assert len(raw) == 28 + 16 * data.size
    back, g2, kind2 = ka.read_snapshot(path)
    np.testing.assert_array_equal(back, data)
    assert (g2, kind2) == (g, kind)


kernels = st.tuples(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0), st.sampled_from([4, 8, 12]))


@settings(max_examples=40, deadline=None)
@given(kernels)
def test_group_identities_hold_for_all_k(case):
    seed, size, m = case
    g = make_grid(1, m, 2.0)
    w = g.cell_volume
    k = scaled_kernel(np.random.default_rng(seed), m, w, size)
    sh, ch = ka.sh_ch_from_k(k, g)
    c = lambda a, b: ka.compose(a, b, g)
    delta = ka.identity_kernel(g)
    assert w * np.abs(c(ch, ch) - c(sh.conj(), sh) - delta).max() < 1e-10
    assert w * np.abs(c(ch, sh.conj()) - c(sh.conj(), ch.conj())).max() < 1e-10
    eig = np.linalg.eigvalsh(w * ch)
    assert eig.min() >= 1 - 1e-10
    u, s = ka.takagi(k, g)
    assert np.all(s >= 0) and np.all(np.diff(s) <= 1e-15)
    assert np.abs(u @ np.diag(s) @ u.T - w * k).max() <= 1e-10 * max(s[0], 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.95))
def test_zeta_identities_hold_for_all_zeta(seed, size):
    z = scaled_kernel(np.random.default_rng(seed), N, W, size)
    pair = ka.PairState(z, G)
    chop = W * pair.ch
    lhs = np.eye(N) - np.linalg.inv(chop @ chop)
    np.testing.assert_allclose(lhs, W * W * z.conj() @ z, atol=1e-10)
    omega = pair.omega_p
    np.testing.assert_allclose(W * omega, 0.5 * (W * pair.ch2k - np.eye(N)), atol=1e-10)
    ez = ka.bogoliubov_from_zeta(z, G).operator()
    ek = ka.bogoliubov_matrix(ka.k_from_zeta(z, G), G).operator()
    assert np.abs(ez - ek).max() < 1e-9
