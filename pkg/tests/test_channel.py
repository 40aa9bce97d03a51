import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scrap.channel import (
    DESK_RF,
    FULL_RF,
    SPEED_OF_LIGHT as C,
    OscillatingRange,
    Path,
    RfConfig,
    ScenarioParams,
    Scene,
    SineDriftRange,
    StaticRange,
    make_rng,
    drifting_scenario,
    range_steering,
    synthesize_frame,
    velocity_steering,
)
from scrap.errors import ValidationError

SMALL = RfConfig(f_c=27.4e9, N=16, delta_f=120e3, M=8)


def test_rf_config_invariants():
    assert FULL_RF.B == pytest.approx(1584 * 120e3, rel=1e-12)
    assert FULL_RF.T0 == pytest.approx(1 / 120e3)
    assert DESK_RF.B == pytest.approx(190e6, rel=1e-12)
    with pytest.raises(ValidationError):
        RfConfig(f_c=1e9, N=1, delta_f=1e3, M=4)
    with pytest.raises(ValidationError):
        RfConfig(f_c=1e9, N=4, delta_f=0.0, M=4)


def test_range_steering_zero_range():
    np.testing.assert_array_equal(range_steering(0.0, SMALL), np.ones(SMALL.N))


def test_range_steering_quarter_turn():
    cfg = RfConfig(f_c=27.4e9, N=2, delta_f=120e3, M=2)
    a = range_steering(C / (8 * 120e3), cfg)
    np.testing.assert_allclose(a, [1, -1j], atol=1e-12)


def test_velocity_steering_quarter_turn():
    cfg = RfConfig(f_c=27.4e9, N=2, delta_f=120e3, M=2)
    b = velocity_steering(C / (8 * cfg.T0 * cfg.f_c), cfg)
    np.testing.assert_allclose(b, [1, 1j], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0, 2000), v=st.floats(-300, 300))
def test_steering_unimodular_and_symmetric(r, v):
    a = range_steering(r, SMALL)
    b = velocity_steering(v, SMALL)
    assert a[0] == 1
    np.testing.assert_allclose(np.abs(a), 1, atol=1e-12)
    np.testing.assert_allclose(np.abs(b), 1, atol=1e-12)
    np.testing.assert_allclose(velocity_steering(-v, SMALL), b.conj(), atol=1e-12)


def test_velocity_steering_zero():
    np.testing.assert_array_equal(velocity_steering(0.0, SMALL), np.ones(SMALL.M))


def test_negative_range_rejected():
    with pytest.raises(ValidationError):
        range_steering(-1.0, SMALL)


def test_empty_scene_is_zero():
    f = synthesize_frame(Scene(), SMALL, 0.0, make_rng(0))
    assert f.data.shape == (SMALL.N, SMALL.M)
    assert not np.any(f.data)


def test_single_static_path_is_all_ones():
    scene = Scene((Path(1.0, StaticRange(0.0)),))
    f = synthesize_frame(scene, SMALL, 0.0, make_rng(0), phase=1.0)
    np.testing.assert_allclose(f.data, np.ones((SMALL.N, SMALL.M)), atol=1e-15)


def test_two_paths_rank_two():
    scene = Scene((Path(1.0, StaticRange(3.0)), Path(0.5j, SineDriftRange(9.0, drift_rate=1.0))))
    h = synthesize_frame(scene, SMALL, 0.3, make_rng(1)).data
    s = np.linalg.svd(h, compute_uv=False)
    assert s[2] <= 1e-10 * s[0]


def test_linearity_over_path_sets():
    p1 = (Path(1.0, StaticRange(4.0)), Path(0.3 - 0.2j, StaticRange(17.0)))
    p2 = (Path(0.7j, OscillatingRange(5, 20, 2.0)),)
    t = 1.7
    joint = synthesize_frame(Scene(p1 + p2), SMALL, t, make_rng(0), phase=np.exp(0.4j)).data
    parts = sum(synthesize_frame(Scene(p), SMALL, t, make_rng(0), phase=np.exp(0.4j)).data for p in (p1, p2))
    np.testing.assert_allclose(joint, parts, atol=1e-12)


def test_noise_statistics():
    cfg = RfConfig(f_c=27.4e9, N=250, delta_f=120e3, M=400)  # 1e5 samples
    p_n = 3.0
    scene = Scene((), noise_power_total=p_n)
    h = synthesize_frame(scene, cfg, 0.0, make_rng(5)).data
    var = np.mean(np.abs(h) ** 2)
    assert abs(var - p_n / cfg.N) <= 0.03 * p_n / cfg.N
    # circular: real and imaginary halves carry equal power
    assert abs(np.var(h.real) - np.var(h.imag)) <= 0.03 * p_n / cfg.N


def test_phase_rotation_leaves_magnitudes():
    scene = Scene((Path(1.0, StaticRange(4.0)), Path(0.2, StaticRange(8.0))))
    h1 = synthesize_frame(scene, SMALL, 0.0, make_rng(3), phase=1.0).data
    h2 = synthesize_frame(scene, SMALL, 0.0, make_rng(3), phase=np.exp(2.1j)).data
    np.testing.assert_allclose(np.abs(h1), np.abs(h2), atol=1e-12)


def test_random_phase_is_drawn_per_frame():
    scene = Scene((Path(1.0, StaticRange(0.0)),))
    rng = make_rng(0)
    a = synthesize_frame(scene, SMALL, 0.0, rng).data[0, 0]
    b = synthesize_frame(scene, SMALL, 0.0, rng).data[0, 0]
    assert abs(abs(a) - 1) < 1e-12 and abs(abs(b) - 1) < 1e-12
    assert abs(a - b) > 1e-6


def test_same_seed_same_frame():
    scene = drifting_scenario(DESK_RF, 4).with_noise(1.0)
    a = synthesize_frame(scene, DESK_RF, 0.5, make_rng(4, 1)).data
    b = synthesize_frame(scene, DESK_RF, 0.5, make_rng(4, 1)).data
    np.testing.assert_array_equal(a, b)


class TestDriftingScenario:
    params = ScenarioParams(duration=100.0)

    def scene(self, seed=0):
        return drifting_scenario(DESK_RF, seed, self.params)

    def test_path_counts(self):
        s = self.scene()
        assert len(s.clutter) == 5
        assert len(s.targets) == 1

    def test_seed_reproducible(self):
        assert self.scene(3) == self.scene(3)
        assert self.scene(3) != self.scene(4)

    def test_dynamic_clutter_start_and_drift(self):
        dyn = self.scene().clutter[0]
        assert abs(dyn.range(0.0) - 11.5) <= self.params.dynamic_amplitude
        traj = dyn.trajectory
        drift = traj.drift_rate * self.params.duration
        assert drift == pytest.approx(0.5)

    def test_target_extrema(self):
        tgt = self.scene().targets[0]
        period = tgt.trajectory.period
        t = np.linspace(0, period, 200_001)
        r = tgt.trajectory.range(t)
        assert r.min() == pytest.approx(5.0, abs=1e-6)
        assert r.max() == pytest.approx(20.0, abs=1e-6)

    def test_target_peak_speed_by_finite_differences(self):
        tgt = self.scene().targets[0]
        t = np.linspace(0, tgt.trajectory.period, 100_001)
        speed = np.abs(np.diff(tgt.trajectory.range(t)) / np.diff(t))
        assert speed.max() == pytest.approx(2.0, rel=0.01)

    def test_clutter_amplitude_spread(self):
        for seed in range(10):
            amps = [abs(p.alpha) for p in self.scene(seed).clutter]
            assert max(amps) == pytest.approx(1.0)
            assert min(amps) >= 10 ** (-self.params.amplitude_spread_db / 20) - 1e-12
