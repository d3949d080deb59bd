"""Experiment drivers shared by the command-line tool and the test suite.

Each function runs one self-contained Monte Carlo experiment with explicit,
seeded parameters and returns plain data (dicts, arrays, accumulators), so
the CLI can serialize results and the tests can assert on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis
from .engine import EngineConfig, lindblad_propagate
from .ensemble import (
    evolve_recorded,
    final_states,
    trajectory_seeds,
    window_end_probabilities,
    absorb_probe,
)
from .schedule import MeasurementSchedule
from .spin import SpinModel, build_model, preset_state

__all__ = [
    "make_config",
    "state_invariant_probe",
    "born_collapse",
    "martingale_drift",
    "lindblad_mean",
    "stepper_ks",
    "DwellResult",
    "dwell_experiment",
    "collapse_time_experiment",
    "cascade_probe",
    "density_experiment",
    "density_summaries",
]

_SYSTEMS = {"spin_half": "half", "spin_one": "one"}


def make_config(
    system: str,
    m_z: float,
    m_x: float,
    *,
    period: float = 2.0,
    dt: float = 1e-4,
    duration: float | None = None,
    stepper: str = "kraus",
    seed: int = 0,
    sample_stride: int = 10,
    model: SpinModel | None = None,
) -> EngineConfig:
    """EngineConfig from measurement strengths (amplitudes derived from the
    period)."""
    if model is None:
        model = build_model(_SYSTEMS.get(system, system))
    schedule = MeasurementSchedule.from_strengths(period, m_z, m_x)
    return EngineConfig(
        model=model,
        schedule=schedule,
        dt=dt,
        duration=period if duration is None else duration,
        stepper=stepper,
        seed=seed,
        sample_stride=sample_stride,
    )


def _plane_samples(states: np.ndarray, model: SpinModel) -> np.ndarray:
    """(x, z) phase-plane coordinates for a block of states: coherence
    components (r_x, r_z) for spin 1/2, spin components for spin 1."""
    if model.spin == "half":
        from .spin import PAULI_X, PAULI_Z

        xs = np.einsum("...ij,ji->...", states, PAULI_X).real
        zs = np.einsum("...ij,ji->...", states, PAULI_Z).real
    else:
        sx, _, sz = model.s_ops
        xs = np.einsum("...ij,ji->...", states, sx).real
        zs = np.einsum("...ij,ji->...", states, sz).real
    return np.stack([xs, zs], axis=-1)


# ---------------------------------------------------------------------------
# invariant probe
# ---------------------------------------------------------------------------


def state_invariant_probe(
    system: str,
    *,
    n_traj: int = 25,
    m: float = 8.0,
    dt: float = 1e-4,
    period: float = 2.0,
    seed: int = 101,
    stepper: str = "kraus",
    threads: int = 1,
) -> dict:
    """Evolve an ensemble for one full period sampling every step, and
    report the worst trace defect, Hermiticity defect, and minimum
    eigenvalue over all sampled states."""
    config = make_config(
        system, m, m, period=period, dt=dt, stepper=stepper, seed=seed, sample_stride=1
    )
    seeds = trajectory_seeds(seed, n_traj)
    initial = preset_state(config.model, "mixed_start")
    states = evolve_recorded(config, initial, seeds, threads=threads)
    flat = states.reshape(-1, config.model.dim, config.model.dim)
    diag = np.einsum("nii->n", flat).real
    trace_defect = float(np.abs(diag - 1.0).max())
    herm_defect = float(np.abs(flat - flat.conj().transpose(0, 2, 1)).max())
    min_eig = np.inf
    for lo in range(0, flat.shape[0], 100_000):
        vals = np.linalg.eigvalsh(flat[lo : lo + 100_000])
        min_eig = min(min_eig, float(vals.min()))
    return {
        "system": system,
        "steps": config.total_steps * n_traj,
        "states_checked": int(flat.shape[0]),
        "max_trace_defect": trace_defect,
        "max_hermiticity_defect": herm_defect,
        "min_eigenvalue": float(min_eig),
    }


# ---------------------------------------------------------------------------
# Born-rule collapse fractions
# ---------------------------------------------------------------------------


def born_collapse(
    *,
    system: str = "spin_one",
    initial: str = "eig_z(-1)",
    observable: str = "x",
    m: float = 32.0,
    n_traj: int = 10_000,
    period: float = 2.0,
    dt: float = 2.5e-4,
    eps: float = 1e-3,
    seed: int = 202,
    threads: int = 1,
) -> dict:
    """One strong measurement window; returns collapse-label frequencies."""
    config = make_config(system, m, m, period=period, dt=dt, seed=seed)
    model = config.model
    seeds = trajectory_seeds(seed, n_traj)
    rho0 = preset_state(model, initial)
    offset = 0 if observable == "z" else 1
    finals = final_states(
        config, rho0, seeds, n_half_windows=1, window_offset=offset, threads=threads
    )
    projs = np.stack(model.projectors(observable))
    probs = np.einsum("bij,kji->bk", finals, projs).real
    labels = analysis.classify_probabilities(probs, model.labels, eps)
    complete = labels != analysis.INCOMPLETE
    freqs = {
        lab: float((labels == lab).sum() / max(complete.sum(), 1))
        for lab in model.labels
    }
    return {
        "frequencies": freqs,
        "complete_fraction": float(complete.mean()),
        "n_trajectories": n_traj,
    }


# ---------------------------------------------------------------------------
# martingale (zero-drift) check
# ---------------------------------------------------------------------------


def martingale_drift(
    system: str,
    *,
    m_z: float = 1.0,
    n_traj: int = 10_000,
    period: float = 2.0,
    dt: float = 2.5e-4,
    n_samples: int = 10,
    seed: int = 303,
    stepper: str = "kraus",
    threads: int = 1,
) -> dict:
    """<S_z> drift during one z window from random initial states.

    Returns paired-difference means and standard errors at each sample time;
    under pure measurement of S_z the expectation is a martingale, so every
    |mean| should sit within a few standard errors of zero.
    """
    from .spin import random_density

    half_steps = int(round(period / 2 / dt))
    stride = half_steps // n_samples
    config = make_config(
        system, m_z, 0.0, period=period, dt=dt, seed=seed,
        sample_stride=stride, stepper=stepper,
    )
    model = config.model
    rng = np.random.default_rng(seed)
    initial = np.stack([random_density(rng, model.dim) for _ in range(n_traj)])
    seeds = trajectory_seeds(seed, n_traj)
    states = evolve_recorded(
        config, initial, seeds, n_half_windows=1, window_offset=0, threads=threads
    )
    sz = model.s_ops[2]
    vals = np.einsum("bnij,ji->bn", states, sz).real  # (n_traj, n_samples+1)
    deltas = vals - vals[:, :1]
    mean = deltas.mean(axis=0)
    se = deltas.std(axis=0, ddof=1) / np.sqrt(n_traj)
    se[0] = np.inf  # the t = 0 difference is identically zero
    times = np.arange(vals.shape[1]) * stride * dt
    return {"times": times, "mean_delta": mean, "stderr": se}


# ---------------------------------------------------------------------------
# ensemble mean vs the exact master-equation propagator
# ---------------------------------------------------------------------------


def lindblad_mean(
    system: str,
    stepper: str,
    *,
    amp: float = 1.0,
    t_final: float = 0.5,
    n_traj: int = 10_000,
    dt: float = 2.5e-4,
    n_samples: int = 10,
    initial: str | None = None,
    seed: int = 404,
    threads: int = 1,
) -> dict:
    """Run one constant-coupling window and compare the ensemble mean state
    against the exact propagator at each sample time."""
    period = 2.0 * t_final
    half_steps = int(round(t_final / dt))
    stride = half_steps // n_samples
    m_z = amp**2 * period / 2.0
    config = make_config(
        system, m_z, 0.0, period=period, dt=dt, seed=seed,
        sample_stride=stride, stepper=stepper,
    )
    model = config.model
    if initial is None:
        initial = "eig_x(+1)" if model.spin == "half" else "eig_x(-1)"
    rho0 = preset_state(model, initial)
    seeds = trajectory_seeds(seed, n_traj)
    states = evolve_recorded(
        config, rho0, seeds, n_half_windows=1, window_offset=0, threads=threads
    )
    channel = amp * model.meas_ops[0]
    times = np.arange(states.shape[1]) * stride * dt
    mean = states.mean(axis=0)
    spread = np.sqrt(
        np.mean(np.abs(states - mean[None]) ** 2, axis=0)
    ) / np.sqrt(n_traj)
    worst = 0.0
    worst_margin = -np.inf
    for k, t in enumerate(times):
        oracle = lindblad_propagate(rho0, None, [channel], float(t))
        dev = np.abs(mean[k] - oracle)
        tol = np.maximum(5.0 * spread[k], 5e-3)
        worst = max(worst, float(dev.max()))
        worst_margin = max(worst_margin, float((dev - tol).max()))
    return {
        "times": times,
        "max_deviation": worst,
        "worst_margin": worst_margin,  # <= 0 means within tolerance everywhere
        "mean_states": mean,
        "stderr": spread,
        "channel_amp": amp,
        "initial": rho0,
    }


# ---------------------------------------------------------------------------
# Kraus vs Euler distribution agreement
# ---------------------------------------------------------------------------


def stepper_ks(
    system: str,
    *,
    m_z: float = 1.0,
    n_traj: int = 10_000,
    period: float = 2.0,
    dt: float = 1e-4,
    seed: int = 505,
    threads: int = 1,
) -> dict:
    """Kolmogorov-Smirnov distance between Kraus and Euler <S_z> samples at
    the middle of a z window, from the maximally mixed state."""
    from scipy.stats import ks_2samp

    half_steps = int(round(period / 2 / dt))
    stride = half_steps // 2  # samples at 0, T/4, T/2
    samples = {}
    for stepper in ("kraus", "euler"):
        config = make_config(
            system, m_z, 0.0, period=period, dt=dt, seed=seed,
            sample_stride=stride, stepper=stepper,
        )
        model = config.model
        rho0 = preset_state(model, "mixed_start")
        seeds = trajectory_seeds(seed, n_traj)
        states = evolve_recorded(
            config, rho0, seeds, n_half_windows=1, window_offset=0, threads=threads
        )
        sz = model.s_ops[2]
        samples[stepper] = np.einsum("bij,ji->b", states[:, 1], sz).real
    stat = float(ks_2samp(samples["kraus"], samples["euler"]).statistic)
    return {"ks_distance": stat, "samples": samples}


# ---------------------------------------------------------------------------
# dwell times
# ---------------------------------------------------------------------------


@dataclass
class DwellResult:
    system: str
    m_z: float
    m_x: float
    probs: np.ndarray  # (n_traj, outcomes, dim) z-window-end probabilities
    labels_order: tuple[int, ...]

    def stats(self, eps: float = 1e-3) -> analysis.DwellStats:
        labels = analysis.classify_probabilities(
            self.probs.reshape(-1, self.probs.shape[-1]), self.labels_order, eps
        ).reshape(self.probs.shape[:2])
        merged = analysis.DwellStats()
        for row in labels:
            merged = merged.merge(analysis.dwell_times(row))
        return merged


def dwell_experiment(
    system: str,
    m_x: float,
    *,
    m_z: float = 32.0,
    n_traj: int = 20,
    outcomes_per_traj: int = 250,
    period: float = 2.0,
    dt: float = 2.5e-4,
    seed: int = 606,
    stepper: str = "kraus",
    threads: int = 1,
) -> DwellResult:
    """Alternating protocol from the mixed state; returns the z-window-end
    eigenstate probabilities from which dwell statistics are classified."""
    config = make_config(
        system, m_z, m_x, period=period, dt=dt, seed=seed, stepper=stepper
    )
    model = config.model
    seeds = trajectory_seeds(seed, n_traj)
    rho0 = preset_state(model, "mixed_start")
    probs = window_end_probabilities(
        config, rho0, seeds, n_outcomes=outcomes_per_traj, observable="z",
        threads=threads,
    )
    return DwellResult(
        system=system, m_z=m_z, m_x=m_x, probs=probs, labels_order=model.labels
    )


# ---------------------------------------------------------------------------
# collapse (first-passage) times
# ---------------------------------------------------------------------------


def collapse_time_experiment(
    *,
    initial: str,
    targets: tuple[int, ...],
    amp: float = 1.0,
    window: float = 6.0,
    threshold: float = 0.9,
    n_traj: int = 10_000,
    dt: float = 1e-3,
    seed: int = 707,
    system: str = "spin_one",
    threads: int = 1,
) -> analysis.CollapseTimeStats:
    """First-passage times to target z eigenstates during a single z window
    of the given length and coupling amplitude."""
    model = build_model(_SYSTEMS.get(system, system))
    schedule = MeasurementSchedule(period=2.0 * window, a_max=amp, b_max=0.0)
    config = EngineConfig(
        model=model, schedule=schedule, dt=dt, duration=2.0 * window,
        stepper="kraus", seed=seed, sample_stride=1,
    )
    rho0 = preset_state(model, initial)
    return analysis.collapse_times(
        config, rho0, "z", tuple(targets), threshold, n_traj, threads=threads
    )


# ---------------------------------------------------------------------------
# collapse cascade probe
# ---------------------------------------------------------------------------


def cascade_probe(
    *,
    m_x: float = 32.0,
    n_traj: int = 1000,
    period: float = 2.0,
    dt: float = 2.5e-4,
    floor: float = 1e-12,
    eps: float = 1e-3,
    seed: int = 808,
    threads: int = 1,
) -> dict:
    """Spin-1 x window from the -1 z eigenstate: absorbing-zero statistics
    and final-state classification."""
    config = make_config("spin_one", m_x, m_x, period=period, dt=dt, seed=seed)
    model = config.model
    seeds = trajectory_seeds(seed, n_traj)
    rho0 = preset_state(model, "eig_z(-1)")
    crossed, max_after, finals = absorb_probe(
        config, rho0, seeds, observable="x", floor=floor, threads=threads
    )
    projs = np.stack(model.projectors_x)
    probs = np.einsum("bij,kji->bk", finals, projs).real
    labels = analysis.classify_probabilities(probs, model.labels, eps)
    worst = float(max_after[crossed == 1].max()) if (crossed == 1).any() else 0.0
    return {
        "n_crossed": int((crossed == 1).any(axis=1).sum()),
        "n_crossings": int(crossed.sum()),
        "max_prob_after_zero": worst,
        "one_hot_fraction": float((labels != analysis.INCOMPLETE).mean()),
        "initial_probs": [float(np.trace(rho0 @ p).real) for p in projs],
    }


# ---------------------------------------------------------------------------
# cumulative density
# ---------------------------------------------------------------------------


def density_experiment(
    system: str,
    *,
    m: float = 8.0,
    duration: float = 500.0,
    n_traj: int = 1,
    period: float = 2.0,
    dt: float = 1e-4,
    sample_stride: int = 10,
    bins: int = 200,
    seed: int = 909,
    stepper: str = "kraus",
    initial: str = "mixed_start",
    threads: int = 1,
) -> analysis.Histogram2D:
    """Cumulative phase-plane density over one or more long trajectories,
    merged in trajectory-index order."""
    config = make_config(
        system, m, m, period=period, dt=dt, duration=duration,
        seed=seed, sample_stride=sample_stride, stepper=stepper,
    )
    model = config.model
    rho0 = preset_state(model, initial)
    hist = analysis.Histogram2D.empty(bins=bins)
    for i in range(n_traj):
        states = evolve_recorded(
            config, rho0, np.array([seed + i]), threads=threads
        )
        pts = _plane_samples(states[0], model)
        hist.add(pts[:, 0], pts[:, 1])
    return hist


def density_summaries(hist: analysis.Histogram2D, system: str) -> dict:
    """Mass near each eigenstate (radius 0.1) plus, for spin 1, the mass
    strictly inside the four petal regions."""
    out: dict = {"total": hist.total}
    centers = {
        "center": (0.0, 0.0),
        "z_plus": (0.0, 1.0),
        "z_minus": (0.0, -1.0),
        "x_plus": (1.0, 0.0),
        "x_minus": (-1.0, 0.0),
    }
    out["eigenstate_mass"] = {
        name: hist.mass_in_disk(c, 0.1) for name, c in centers.items()
    }
    if system == "spin_one":
        margin = 1.5 * (hist.x_edges[1] - hist.x_edges[0])
        petal = sum(
            hist.mass_in_polygon(poly, margin=margin)
            for poly in analysis.petal_polygons()
        )
        out["petal_mass"] = int(petal)
        out["petal_fraction"] = float(petal / max(hist.total, 1))
    return out
