import numpy as np
import pytest

from qsdsim.engine import (
    EngineConfig,
    NoiseSource,
    euler_step,
    kraus_operators,
    kraus_step,
    lindblad_propagate,
    run_trajectory,
)
from qsdsim.experiments import make_config
from qsdsim.schedule import MeasurementSchedule
from qsdsim.spin import build_model, preset_state, random_density

HALF = build_model("half")
ONE = build_model("one")


class TestKrausStep:
    def test_eigenprojector_fixed_point(self):
        rho = np.diag([1.0, 0.0, 0.0]).astype(complex)
        channel = 2.0 * ONE.s_ops[2]
        out = kraus_step(rho, None, [channel], 1e-4, NoiseSource(0))
        assert np.abs(out - rho).max() <= 1e-12

    def test_no_channels_identity(self):
        rng = np.random.default_rng(0)
        rho = random_density(rng, 3)
        out = kraus_step(rho, None, [], 1e-4, NoiseSource(0))
        assert np.array_equal(out, rho)

    def test_completeness(self):
        # M+^dag M+ + M-^dag M- = I + O(dt^2)
        dt = 1e-4
        channel = 1.3 * ONE.s_ops[0]
        mp, mm = kraus_operators(np.zeros((3, 3)), channel, dt)
        total = mp.conj().T @ mp + mm.conj().T @ mm
        assert np.abs(total - np.eye(3)).max() <= 10 * dt**2 * np.abs(channel).max() ** 4

    def test_single_step_noise_amplitude(self):
        # from the mixed state with channel a*sigma_z the coherence moves by
        # +-2 a sqrt(dt) to leading order
        a, dt = 0.7, 1e-8
        rho = np.eye(2, dtype=complex) / 2
        for seed in range(6):
            out = kraus_step(rho, None, [a * HALF.meas_ops[0]], dt, NoiseSource(seed))
            dr_z = np.trace(out @ np.array([[1, 0], [0, -1]])).real
            assert abs(abs(dr_z) - 2 * a * np.sqrt(dt)) <= 100 * dt

    def test_output_valid(self):
        rng = np.random.default_rng(4)
        noise = NoiseSource(9)
        rho = random_density(rng, 3)
        for _ in range(200):
            rho = kraus_step(rho, None, [1.5 * ONE.s_ops[2]], 1e-3, noise)
        assert abs(np.trace(rho) - 1) <= 1e-12
        assert np.abs(rho - rho.conj().T).max() == 0.0
        assert np.linalg.eigvalsh(rho).min() >= -1e-12


class TestEulerStep:
    def test_no_channels_identity(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng, 2)
        out = euler_step(rho, None, [], 1e-4, NoiseSource(0))
        assert np.abs(out - rho).max() <= 1e-15

    def test_drift_matches_master_equation(self):
        # average single-step increment against the exact propagator
        rng = np.random.default_rng(2)
        rho = random_density(rng, 2)
        a, dt, n = 0.9, 1e-4, 50_000
        channel = a * HALF.meas_ops[0]
        noise = NoiseSource(3)
        acc = np.zeros_like(rho)
        for _ in range(n):
            acc += euler_step(rho, None, [channel], dt, noise) - rho
        mean_delta = acc / n
        oracle = lindblad_propagate(rho, None, [channel], dt) - rho
        # noise term has std ~ |coef| sqrt(dt) per step
        se = 5 * np.sqrt(dt / n)
        assert np.abs(mean_delta - oracle).max() <= se

    def test_coherence_decay_rate(self):
        # E[dr_x] = -2 a^2 r_x dt for the sigma-convention channel
        rng = np.random.default_rng(5)
        rho = random_density(rng, 2)
        r_x = np.trace(rho @ np.array([[0, 1], [1, 0]])).real
        a, dt, n = 1.1, 1e-4, 50_000
        channel = a * HALF.meas_ops[0]
        noise = NoiseSource(8)
        acc = 0.0
        for _ in range(n):
            out = euler_step(rho, None, [channel], dt, noise)
            acc += np.trace(out @ np.array([[0, 1], [1, 0]])).real - r_x
        drift = acc / n / dt
        se = 3 * (2 * a / np.sqrt(dt)) * np.sqrt(dt / dt / n)  # 3 sigma of the mean
        assert abs(drift - (-2 * a * a * r_x)) <= 3 * (2 * a) / np.sqrt(n * dt)


class TestLindbladPropagate:
    def test_t_zero(self):
        rng = np.random.default_rng(6)
        rho = random_density(rng, 3)
        assert np.abs(lindblad_propagate(rho, None, [ONE.s_ops[2]], 0.0) - rho).max() <= 1e-12

    def test_spin_half_coherence_decay(self):
        a = 0.8
        rho = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)  # r_x = 1
        for t in (0.1, 0.5, 2.0):
            out = lindblad_propagate(rho, None, [a * HALF.meas_ops[0]], t)
            r_x = np.trace(out @ np.array([[0, 1], [1, 0]])).real
            assert abs(r_x - np.exp(-2 * a * a * t)) <= 1e-10

    def test_spin_one_dephasing_rates(self):
        a = 1.3
        rng = np.random.default_rng(7)
        rho = random_density(rng, 3)
        for t in (0.05, 0.2):
            out = lindblad_propagate(rho, None, [a * ONE.s_ops[2]], t)
            assert abs(out[0, 2] - rho[0, 2] * np.exp(-2 * a * a * t)) <= 1e-10
            assert abs(out[0, 1] - rho[0, 1] * np.exp(-0.5 * a * a * t)) <= 1e-10
            assert abs(out[1, 2] - rho[1, 2] * np.exp(-0.5 * a * a * t)) <= 1e-10

    def test_hamiltonian_rotation(self):
        # pure Hamiltonian evolution: rho(t) = e^{-iHt} rho e^{iHt}
        h = 0.7 * np.array([[0, 1], [1, 0]], dtype=complex)
        rho = np.diag([1.0, 0.0]).astype(complex)
        t = 0.9
        out = lindblad_propagate(rho, h, [], t)
        import scipy.linalg

        u = scipy.linalg.expm(-1j * h * t)
        assert np.abs(out - u @ rho @ u.conj().T).max() <= 1e-10


class TestEngineConfig:
    def test_validation(self):
        sched = MeasurementSchedule(period=2.0, a_max=1.0, b_max=1.0)
        with pytest.raises(ValueError):
            EngineConfig(ONE, sched, dt=0.2, duration=2.0)  # dt > T/20
        with pytest.raises(ValueError):
            EngineConfig(ONE, sched, dt=1e-4, duration=3.0)  # not a multiple
        with pytest.raises(ValueError):
            EngineConfig(ONE, sched, dt=1e-4, duration=2.0, sample_stride=3)
        with pytest.raises(ValueError):
            EngineConfig(ONE, sched, dt=1e-4, duration=2.0, stepper="rk4")

    def test_window_channel(self):
        config = make_config("spin_one", 2.0, 8.0)
        amp0, op0 = config.window_channel(0)
        amp1, op1 = config.window_channel(1)
        assert abs(amp0 - np.sqrt(2.0)) <= 1e-12
        assert np.array_equal(op0, ONE.meas_ops[0])
        assert abs(amp1 - np.sqrt(8.0)) <= 1e-12
        assert np.array_equal(op1, ONE.meas_ops[1])


class TestRunTrajectory:
    def test_zero_coupling_constant(self):
        config = make_config("spin_one", 0.0, 0.0, period=1.0, dt=0.05, sample_stride=1)
        rng = np.random.default_rng(11)
        rho = random_density(rng, 3)
        rec = run_trajectory(config, rho)
        assert np.abs(rec.spin_xyz - rec.spin_xyz[0]).max() == 0.0
        assert np.abs(rec.final_state - rho).max() == 0.0

    def test_deterministic(self):
        config = make_config("spin_one", 4.0, 4.0, period=1.0, dt=0.01, seed=77)
        rho = preset_state(ONE, "mixed_start")
        rec1 = run_trajectory(config, rho)
        rec2 = run_trajectory(config, rho)
        assert np.array_equal(rec1.spin_xyz, rec2.spin_xyz)
        assert np.array_equal(rec1.eig_probs_z, rec2.eig_probs_z)
        assert np.array_equal(rec1.final_state, rec2.final_state)

    def test_matches_reference_stepper(self):
        # the compiled window kernel and the reference single-step op agree
        # when fed the same noise stream
        config = make_config("spin_half", 2.0, 3.0, period=0.4, dt=0.01, seed=5,
                             sample_stride=1)
        rho0 = preset_state(HALF, "mixed_start")
        rec = run_trajectory(config, rho0)

        noise = NoiseSource(config.seed)
        rho = rho0.astype(complex)
        states = [rho]
        h = np.zeros((2, 2), dtype=complex)
        for w in range(config.n_half_windows):
            amp, gen = config.window_channel(w)
            for _ in range(config.steps_per_half_window):
                rho = kraus_step(rho, h, [amp * gen], config.dt, noise)
                states.append(rho)
        sx = np.array([np.trace(st @ HALF.s_ops[0]).real for st in states])
        sz = np.array([np.trace(st @ HALF.s_ops[2]).real for st in states])
        assert np.abs(sx - rec.spin_xyz[:, 0]).max() <= 1e-12
        assert np.abs(sz - rec.spin_xyz[:, 2]).max() <= 1e-12

    def test_x_window_skipped_when_coupling_zero(self):
        config = make_config("spin_one", 4.0, 0.0, period=1.0, dt=0.01,
                             duration=2.0, seed=3, sample_stride=1)
        rec = run_trajectory(config, preset_state(ONE, "mixed_start"))
        per = config.steps_per_half_window
        # samples inside each x window are constant
        for w in (1, 3):
            seg = rec.eig_probs_z[w * per : (w + 1) * per + 1]
            assert np.abs(seg - seg[0]).max() == 0.0

    def test_sample_count(self):
        config = make_config("spin_one", 1.0, 1.0, period=1.0, dt=0.01,
                             duration=3.0, sample_stride=10)
        rec = run_trajectory(config, preset_state(ONE, "mixed_start"))
        assert rec.times.shape[0] == config.total_steps // 10 + 1
        assert rec.times[-1] == pytest.approx(3.0)

    def test_rejects_invalid_initial(self):
        config = make_config("spin_one", 1.0, 1.0, period=1.0, dt=0.01)
        with pytest.raises(ValueError):
            run_trajectory(config, np.eye(3, dtype=complex))  # trace 3
