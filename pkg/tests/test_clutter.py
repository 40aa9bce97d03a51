import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scrap.channel import DESK_RF, Path, RfConfig, Scene, StaticRange, make_rng, range_steering, synthesize_frame, velocity_steering
from scrap.clutter import (
    ClutterState,
    OrderSelector,
    acquire_initial,
    estimate_noise_sigma,
    mdl_order,
    mp_median,
    mp_sv_threshold,
    projection_factor,
    remove_clutter,
    scrap_update,
    smoothed_matrix,
    stack_acquisitions,
)
from scrap.errors import ValidationError
from scrap.numerics import compact_svd, principal_angles

SMALL = RfConfig(f_c=27.4e9, N=16, delta_f=750e3, M=8)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def static_frames(k, paths, cfg=SMALL, noise=0.0, seed=0):
    scene = Scene(tuple(paths), noise_power_total=noise)
    rng = make_rng(seed, 1)
    return [synthesize_frame(scene, cfg, 0.01 * i, rng) for i in range(k)]


def random_state(rng, q=64, k=12, order=4):
    c = crandn(rng, k, q) * np.linspace(5, 1, k)[:, None]
    return acquire_initial(list(c.reshape(k, q)), OrderSelector(sigma_n=1e-3, l_max=order))


# --- stacking ---------------------------------------------------------------


def test_stack_single_scalar_frame():
    np.testing.assert_array_equal(stack_acquisitions([np.array([[3 + 4j]])]), [[3 + 4j]])


def test_stack_two_frames_matches_hand_vectorisation():
    f0 = np.array([[1, 2], [3, 4]], dtype=complex)
    f1 = np.array([[5j, 6j], [7j, 8j]])
    expected = np.array([[1, 2, 3, 4], [5j, 6j, 7j, 8j]])
    np.testing.assert_array_equal(stack_acquisitions([f0, f1]), expected)


def test_stack_repeated_frames_rank_one():
    rng = np.random.default_rng(0)
    f = crandn(rng, 4, 5)
    s = np.linalg.svd(stack_acquisitions([f] * 6), compute_uv=False)
    assert s[1] <= 1e-12 * s[0]


def test_stack_rejects_mismatch_and_empty():
    with pytest.raises(ValidationError):
        stack_acquisitions([np.zeros((2, 2)), np.zeros((2, 3))])
    with pytest.raises(ValidationError):
        stack_acquisitions([])


# --- threshold --------------------------------------------------------------


def test_threshold_unit_ratio():
    assert mp_sv_threshold(OrderSelector(sigma_n=1.0), 50, 50, 1.0, 0) == pytest.approx(2.0)


def test_threshold_scaled_by_rho_after_start():
    assert mp_sv_threshold(OrderSelector(sigma_n=1.0), 50, 50, 0.5, 1) == pytest.approx(1.0)


def test_threshold_aspect_ratio_four():
    assert mp_sv_threshold(OrderSelector(sigma_n=0.1), 10, 40, 1.0, 0) == pytest.approx(0.3)


def test_threshold_rho_scaling_can_be_disabled():
    sel = OrderSelector(sigma_n=1.0, rho_scaling=False)
    assert mp_sv_threshold(sel, 50, 50, 0.5, 3) == pytest.approx(2.0)


def test_threshold_requires_sigma():
    with pytest.raises(ValidationError):
        mp_sv_threshold(OrderSelector(), 10, 10, 1.0, 0)
    with pytest.raises(ValidationError):
        mp_sv_threshold(OrderSelector(sigma_n=1.0), 10, 10, 0.0, 1)


# --- MDL --------------------------------------------------------------------


def mdl_brute_force(eigs, n):
    """Direct evaluation of the Wax-Kailath MDL over every candidate order."""
    p = len(eigs)
    best, best_k = None, None
    for k in range(p):
        tail = [float(x) for x in eigs[k:]]
        geo = 1.0
        for x in tail:
            geo *= x ** (1.0 / len(tail))
        arith = sum(tail) / len(tail)
        if arith == 0:
            fit = 0.0
        elif geo == 0:
            fit = float("inf")
        else:
            fit = -n * (p - k) * np.log(geo / arith)
        score = fit + 0.5 * k * (2 * p - k) * np.log(n)
        if best is None or score < best:
            best, best_k = score, k
    return best_k


def test_mdl_flat_spectrum_is_noise():
    assert mdl_order([1.0] * 8, 8, 64) == 0


def test_mdl_two_components():
    s = [100, 99] + [1e-3] * 6
    assert mdl_brute_force(np.square(s), 8) == 2
    assert mdl_order(s, 8, 64) == 2


def test_mdl_single_dominant():
    s = [50] + [1e-6] * 7
    assert mdl_brute_force(np.square(s), 8) == 1
    assert mdl_order(s, 8, 64) == 1


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=12),
    st.integers(2, 200),
)
def test_mdl_matches_brute_force(values, n):
    s = np.sort(np.asarray(values))[::-1]
    assert mdl_order(s, n, 1000) == mdl_brute_force(s ** 2, n)


# --- acquisition ------------------------------------------------------------


def test_acquire_single_static_path():
    r, v = 7.3, 0.0
    frames = static_frames(20, [Path(0.8 - 0.3j, StaticRange(r))])
    state = acquire_initial(frames, OrderSelector(sigma_n=1e-9))
    assert state.order == 1
    expected = np.outer(range_steering(r, SMALL), velocity_steering(v, SMALL)).reshape(-1, 1)
    assert principal_angles(state.subspace, expected).max() < 1e-6


def test_acquire_zero_frames_gives_identity_removal():
    frames = [np.zeros((4, 4), dtype=complex)] * 5
    for sel in (OrderSelector(sigma_n=1.0), OrderSelector("mdl")):
        state = acquire_initial(frames, sel)
        assert state.order == 0
        h = crandn(np.random.default_rng(0), 4, 4)
        np.testing.assert_array_equal(remove_clutter(state, h), h)


def test_acquire_caps_order():
    rng = np.random.default_rng(1)
    frames = list(crandn(rng, 30, 8, 8) * 10)
    state = acquire_initial(frames, OrderSelector(sigma_n=1e-6, l_max=4))
    assert state.order == 4
    # the kept components are the four largest
    s = np.linalg.svd(stack_acquisitions(frames) / np.sqrt(30), compute_uv=False)
    np.testing.assert_allclose(state.singular, s[:4], rtol=1e-10)


@pytest.mark.slow
def test_acquire_pure_noise_desk_scale():
    """K0 = 100 noise-only frames at desk size: L0 = 0 in >= 99% of seeds."""
    q = DESK_RF.Q
    sel = OrderSelector(sigma_n=1.0)
    zero = 0
    trials = 200
    for seed in range(trials):
        rng = make_rng(seed, 7)
        c = crandn(rng, 100, q)
        zero += acquire_initial(list(c), sel).order == 0
    assert zero / trials >= 0.99


def test_phase_insensitivity():
    rng = np.random.default_rng(4)
    frames = static_frames(15, [Path(1.0, StaticRange(3.0)), Path(0.4j, StaticRange(12.0))], noise=0.01 * SMALL.N, seed=2)
    data = [f.data for f in frames]
    sel = OrderSelector(sigma_n=0.1)
    a = acquire_initial(data, sel)
    rot = np.exp(1j * rng.uniform(0, 2 * np.pi))
    b = acquire_initial([rot * d for d in data], sel)
    assert a.order == b.order
    assert principal_angles(a.subspace, b.subspace).max() < 1e-8


def test_estimate_noise_sigma():
    rng = np.random.default_rng(5)
    sigma = 0.37
    frames = list(sigma * crandn(rng, 100, 32, 64))
    assert estimate_noise_sigma(frames) == pytest.approx(sigma, rel=0.02)


def test_mp_median_against_sampled_eigenvalues():
    rng = np.random.default_rng(6)
    k, q = 200, 800
    x = crandn(rng, k, q)
    eig = np.linalg.eigvalsh(x @ x.conj().T / q)
    assert mp_median(k / q) == pytest.approx(np.median(eig), rel=0.02)


# --- update -----------------------------------------------------------------


def test_update_rho_one_equals_fresh_acquisition():
    rng = np.random.default_rng(8)
    prev = random_state(rng, q=128, k=20, order=5)
    frames = list(crandn(rng, 10, 128) * np.linspace(4, 0.5, 10)[:, None])
    sel = OrderSelector(sigma_n=0.05)
    upd = scrap_update(prev, frames, 1.0, sel)
    fresh = acquire_initial(frames, sel)
    assert upd.order == fresh.order
    np.testing.assert_allclose(upd.singular, fresh.singular, rtol=1e-10)
    assert principal_angles(upd.subspace, fresh.subspace).max() < 1e-8
    assert upd.epoch == prev.epoch + 1


@pytest.mark.parametrize("rho", [0.1, 0.25, 0.5, 0.75, 0.95])
def test_static_scene_is_a_fixed_point(rho):
    paths = [Path(1.0, StaticRange(4.0)), Path(0.2 + 0.1j, StaticRange(11.0))]
    sel = OrderSelector(sigma_n=1e-9)
    state = acquire_initial(static_frames(30, paths), sel)
    initial = state.subspace
    for epoch in range(10):
        state = scrap_update(state, static_frames(10, paths, seed=epoch + 10), rho, sel)
        assert principal_angles(initial, state.subspace).max() < 1e-6
        assert state.order == 1


def test_history_block_of_composite():
    rng = np.random.default_rng(9)
    prev = random_state(rng, q=40, k=8, order=3)
    rho = 0.6
    zeros = [np.zeros(40, dtype=complex)] * 5
    top = compact_svd(smoothed_matrix(prev, zeros, rho)).singular[0]
    assert top == pytest.approx(np.sqrt(1 - rho ** 2) * prev.singular[0], rel=1e-10)


def test_update_from_empty_state_uses_new_rows_only():
    rng = np.random.default_rng(10)
    frames = list(crandn(rng, 6, 30) * 5)
    empty = ClutterState.empty(30)
    comp = smoothed_matrix(empty, frames, 0.5)
    assert comp.shape == (6, 30)


def test_update_validates_inputs():
    rng = np.random.default_rng(11)
    prev = random_state(rng, q=20, k=5, order=2)
    with pytest.raises(ValidationError):
        scrap_update(prev, [np.zeros(21)], 0.5, OrderSelector(sigma_n=1.0))
    with pytest.raises(ValidationError):
        scrap_update(prev, [np.zeros(20)], 1.5, OrderSelector(sigma_n=1.0))


# --- removal ----------------------------------------------------------------


def test_subspace_columns_are_annihilated():
    state = random_state(np.random.default_rng(12))
    for j in range(state.order):
        h = state.subspace[:, j]
        assert np.linalg.norm(remove_clutter(state, h)) <= 1e-10 * np.linalg.norm(h)


def test_orthogonal_vectors_pass_through():
    rng = np.random.default_rng(13)
    state = random_state(rng)
    h = crandn(rng, state.q)
    h -= state.subspace @ (state.subspace.conj().T @ h)
    np.testing.assert_allclose(remove_clutter(state, h), h, atol=1e-10 * np.linalg.norm(h))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), order=st.integers(0, 8))
def test_projector_properties(seed, order):
    rng = np.random.default_rng(seed)
    state = random_state(rng, q=48, k=10, order=order)
    h = crandn(rng, 48) * rng.uniform(0.1, 100)
    out = remove_clutter(state, h)
    nh = np.linalg.norm(h)
    assert np.abs(state.subspace.conj().T @ out).max(initial=0.0) <= 1e-9 * nh
    assert np.linalg.norm(out) <= nh + 1e-12
    np.testing.assert_allclose(remove_clutter(state, out), out, atol=1e-10 * nh)
    assert state.order <= order


def test_proj_factor_matches_orthonormal_subspace():
    state = random_state(np.random.default_rng(14), order=6)
    np.testing.assert_allclose(state.proj_factor, state.subspace, atol=1e-8)
    gram = state.subspace.conj().T @ state.subspace
    np.testing.assert_allclose(gram, np.eye(state.order), atol=1e-8)


def test_projection_factor_drops_degenerate_column():
    rng = np.random.default_rng(15)
    base = crandn(rng, 30, 2)
    c = np.hstack([base, base[:, :1] + 1e-9 * crandn(rng, 30, 1)])
    kept, proj = projection_factor(c)
    assert kept.shape[1] == 2
    np.testing.assert_allclose(kept.conj().T @ proj, np.eye(2), atol=1e-8)


def test_remove_clutter_keeps_frame_shape_and_type():
    frames = static_frames(10, [Path(1.0, StaticRange(5.0))])
    state = acquire_initial(frames, OrderSelector(sigma_n=1e-9))
    out = remove_clutter(state, frames[3])
    assert out.data.shape == (SMALL.N, SMALL.M)
    assert out.timestamp == frames[3].timestamp
    assert np.linalg.norm(out.data) <= 1e-9 * np.linalg.norm(frames[3].data)


def test_remove_clutter_rejects_wrong_size():
    state = random_state(np.random.default_rng(16), q=20, k=5, order=2)
    with pytest.raises(ValidationError):
        remove_clutter(state, np.zeros(21))
