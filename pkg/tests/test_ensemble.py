import numpy as np
import pytest

from qsdsim import analysis
from qsdsim.engine import run_trajectory
from qsdsim.ensemble import (
    absorb_probe,
    evolve_recorded,
    final_states,
    first_passage,
    trajectory_seeds,
    window_end_probabilities,
)
from qsdsim.experiments import make_config
from qsdsim.spin import build_model, preset_state

ONE = build_model("one")
HALF = build_model("half")


def small_config(**kw):
    args = dict(period=0.4, dt=0.01, seed=21, sample_stride=1)
    args.update(kw)
    return make_config(args.pop("system", "spin_one"), args.pop("m_z", 4.0),
                       args.pop("m_x", 4.0), **args)


class TestDeterminism:
    def test_batch_size_invariance(self):
        config = small_config()
        rho0 = preset_state(ONE, "mixed_start")
        seeds = trajectory_seeds(config.seed, 5)
        batch = final_states(config, rho0, seeds, n_half_windows=2)
        singles = [
            final_states(config, rho0, seeds[i : i + 1], n_half_windows=2)[0]
            for i in range(5)
        ]
        for i in range(5):
            assert np.array_equal(batch[i], singles[i])

    def test_thread_invariance(self):
        config = small_config()
        rho0 = preset_state(ONE, "mixed_start")
        seeds = trajectory_seeds(1000, 300)  # two chunks
        a = final_states(config, rho0, seeds, n_half_windows=2, threads=1)
        b = final_states(config, rho0, seeds, n_half_windows=2, threads=3)
        assert np.array_equal(a, b)

    def test_euler_batch_invariance(self):
        config = small_config(stepper="euler", m_z=1.0, m_x=1.0, dt=2e-3)
        rho0 = preset_state(ONE, "mixed_start")
        seeds = trajectory_seeds(5, 4)
        batch = final_states(config, rho0, seeds, n_half_windows=2)
        single = final_states(config, rho0, seeds[2:3], n_half_windows=2)
        assert np.array_equal(batch[2], single[0])


class TestRecorded:
    def test_shapes_and_initial_sample(self):
        config = small_config(sample_stride=5)
        rho0 = preset_state(ONE, "mixed_start")
        states = evolve_recorded(config, rho0, trajectory_seeds(0, 3))
        total = config.total_steps
        assert states.shape == (3, total // 5 + 1, 3, 3)
        for b in range(3):
            assert np.array_equal(states[b, 0], rho0)

    def test_matches_run_trajectory(self):
        config = small_config(seed=37)
        rho0 = preset_state(ONE, "mixed_start")
        rec = run_trajectory(config, rho0)
        states = evolve_recorded(config, rho0, np.array([config.seed]))
        sz = np.einsum("nij,ji->n", states[0], ONE.s_ops[2]).real
        assert np.array_equal(sz, rec.spin_xyz[:, 2])


class TestWindowEndProbs:
    def test_consistent_with_trajectory_record(self):
        config = small_config(system="spin_half", m_z=32.0, m_x=2.0, seed=4,
                              duration=1.6)
        rho0 = preset_state(HALF, "mixed_start")
        probs = window_end_probabilities(
            config, rho0, np.array([config.seed]), n_outcomes=4
        )
        rec = run_trajectory(config, rho0)
        seq = analysis.outcome_sequence(rec, HALF, eps=0.49)
        labels = analysis.classify_probabilities(probs[0], HALF.labels, 0.49)
        assert np.array_equal(labels, seq.labels)

    def test_prob_rows_normalized(self):
        config = small_config(m_z=8.0, m_x=8.0)
        probs = window_end_probabilities(
            config, preset_state(ONE, "mixed_start"),
            trajectory_seeds(8, 10), n_outcomes=3,
        )
        assert np.abs(probs.sum(axis=2) - 1.0).max() <= 1e-9
        assert probs.min() >= -1e-10


class TestFirstPassage:
    def test_initial_already_at_target(self):
        config = small_config(m_z=1.0, m_x=0.0)
        rho0 = preset_state(ONE, "eig_z(+1)")
        times, labels, arrived = first_passage(
            config, rho0, trajectory_seeds(0, 4), observable="z",
            target_labels=(1, -1), threshold=0.9,
        )
        assert arrived.all()
        assert np.all(times == 0.0)
        assert np.all(labels == 1)

    def test_strong_measurement_arrives(self):
        config = make_config("spin_one", 8.0, 0.0, period=2.0, dt=1e-3, seed=10,
                             sample_stride=1)
        rho0 = preset_state(ONE, "eig_x(0)")
        times, labels, arrived = first_passage(
            config, rho0, trajectory_seeds(10, 64), observable="z",
            target_labels=(1, -1), threshold=0.9,
        )
        assert arrived.mean() > 0.95
        assert np.nanmin(times[arrived]) > 0.0
        assert set(np.unique(labels[arrived])) <= {1, -1}

    def test_requires_kraus(self):
        config = small_config(stepper="euler")
        with pytest.raises(ValueError):
            first_passage(config, preset_state(ONE, "mixed_start"),
                          trajectory_seeds(0, 2))


class TestAbsorbProbe:
    def test_strong_window_crosses_and_stays(self):
        config = make_config("spin_one", 32.0, 32.0, period=2.0, dt=2.5e-4, seed=6,
                             sample_stride=1)
        rho0 = preset_state(ONE, "eig_z(-1)")
        crossed, max_after, finals = absorb_probe(
            config, rho0, trajectory_seeds(6, 32), observable="x", floor=1e-12,
        )
        assert (crossed == 1).any()
        if (crossed == 1).any():
            assert max_after[crossed == 1].max() <= 1e-9
        tr = np.einsum("bii->b", finals).real
        assert np.abs(tr - 1).max() <= 1e-12
