"""Batched, seed-deterministic ensemble drivers on top of the kernels.

Trajectory i always uses the noise stream seeded ``base_seed + i``; batching,
chunking, and the thread count never change results.  Work is split into
fixed-size chunks of trajectories (disjoint output rows), so running with
``threads > 1`` simply maps chunks onto a thread pool -- the kernels release
the GIL.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from . import kernels
from .engine import EngineConfig, EngineError, kraus_operators
from .linalg import dagger

__all__ = [
    "trajectory_seeds",
    "evolve_recorded",
    "final_states",
    "window_end_probabilities",
    "first_passage",
    "absorb_probe",
]

#: trajectories per work chunk; fixed so results do not depend on threads
CHUNK = 256
#: per-chunk noise buffer budget, in float64 values
_NOISE_BUDGET = 4_000_000


def trajectory_seeds(base_seed: int, n: int) -> np.ndarray:
    return np.asarray(base_seed, dtype=np.int64) + np.arange(n, dtype=np.int64)


def _broadcast_initial(initial: np.ndarray, n: int, dim: int) -> np.ndarray:
    initial = np.asarray(initial, dtype=np.complex128)
    if initial.shape == (dim, dim):
        return np.broadcast_to(initial, (n, dim, dim)).copy()
    if initial.shape == (n, dim, dim):
        return initial.copy()
    raise ValueError(f"initial must be (dim, dim) or (n, dim, dim), got {initial.shape}")


class _WindowOps:
    """Precomputed per-parity operators for the configured stepper."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.hmat = config.h_matrix()
        self.by_parity = []
        for parity in (0, 1):
            amp, gen = config.window_channel(parity)
            entry = {"amp": amp, "g": np.ascontiguousarray(gen)}
            if config.stepper == "kraus":
                m_plus, m_minus = kraus_operators(self.hmat, amp * gen, config.dt)
                entry["mp"] = np.ascontiguousarray(m_plus)
                entry["mm"] = np.ascontiguousarray(m_minus)
                entry["np"] = np.ascontiguousarray(dagger(m_plus) @ m_plus)
                entry["nm"] = np.ascontiguousarray(dagger(m_minus) @ m_minus)
            else:
                entry["g2"] = np.ascontiguousarray(gen @ gen)
            self.by_parity.append(entry)

    def skip_window(self, parity: int) -> bool:
        # nothing acts: zero coupling and no Hamiltonian (no noise is
        # consumed for an inactive channel, so skipping is exact)
        return self.by_parity[parity]["amp"] == 0.0 and not np.any(self.hmat)


def _draw(gens, amp: float, n_traj: int, n_steps: int, kind: str) -> np.ndarray:
    out = np.zeros((n_traj, n_steps), dtype=np.float64)
    if amp != 0.0:
        for b in range(n_traj):
            if kind == "uniform":
                gens[b].random(out=out[b])
            else:
                gens[b].standard_normal(out=out[b])
    return out


def _raise_failures(config: EngineConfig, status, reason, seeds) -> None:
    bad = np.nonzero(status >= 0)[0]
    if bad.size == 0:
        return
    b = int(bad[0])
    raise EngineError(
        f"{config.stepper} stepper failed for seed {int(seeds[b])} at "
        f"t = {status[b] * config.dt:.6g} (invalid branch probabilities or "
        f"trace); {bad.size} trajectorie(s) affected"
    )


def _run_chunked(n_traj: int, threads: int, chunk_fn: Callable[[int, int], None]) -> None:
    bounds = [(lo, min(lo + CHUNK, n_traj)) for lo in range(0, n_traj, CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        for lo, hi in bounds:
            chunk_fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(chunk_fn, lo, hi) for lo, hi in bounds]
        for fut in futures:
            fut.result()


def _evolve_chunk(
    config: EngineConfig,
    ops: _WindowOps,
    rho: np.ndarray,
    seeds: np.ndarray,
    *,
    window_offset: int,
    n_half_windows: int,
    rec_stride: int = 0,
    rec_out: np.ndarray | None = None,
    window_end: Callable[[int, np.ndarray], None] | None = None,
    fp_args: tuple | None = None,
    absorb_args: tuple | None = None,
    min_diag_out: np.ndarray | None = None,
) -> None:
    """Advance one chunk of trajectories through consecutive half-windows."""
    n_traj, dim = rho.shape[0], rho.shape[1]
    gens = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    status = np.full(n_traj, -1, dtype=np.int64)
    reason = np.zeros(n_traj, dtype=np.int8)
    empty_rec = np.empty((n_traj, 0, dim, dim), dtype=np.complex128)
    min_diag = np.zeros(n_traj, dtype=np.float64) if min_diag_out is None else min_diag_out
    steps = config.steps_per_half_window
    seg_max = max(1, min(steps, _NOISE_BUDGET // max(n_traj, 1)))
    kind = "uniform" if config.stepper == "kraus" else "normal"
    for wi in range(n_half_windows):
        parity = (window_offset + wi) % 2
        entry = ops.by_parity[parity]
        if ops.skip_window(parity):
            # zero coupling and no Hamiltonian: the window is an exact
            # identity and consumes no noise; probes cannot change state
            if rec_stride > 0:
                g0w = wi * steps
                rec_out[:, g0w // rec_stride : (g0w + steps) // rec_stride] = rho[:, None]
            if window_end is not None:
                window_end(wi, rho)
            continue
        done = 0
        while done < steps:
            nseg = min(seg_max, steps - done)
            g0 = wi * steps + done
            noise = _draw(gens, entry["amp"], n_traj, nseg, kind)
            if rec_stride > 0:
                out = rec_out[:, g0 // rec_stride : (g0 + nseg) // rec_stride]
            else:
                out = empty_rec
            if config.stepper == "kraus":
                if fp_args is not None:
                    projs, threshold, first_step, first_target = fp_args
                    kernels.kraus_window_first_passage(
                        rho, entry["mp"], entry["mm"], entry["np"], entry["nm"],
                        noise, projs, threshold, status, reason, g0,
                        first_step, first_target,
                    )
                elif absorb_args is not None:
                    projs, lo, crossed, max_after = absorb_args
                    kernels.kraus_window_absorb(
                        rho, entry["mp"], entry["mm"], entry["np"], entry["nm"],
                        noise, projs, lo, crossed, max_after, status, reason, g0,
                    )
                else:
                    kernels.kraus_window(
                        rho, entry["mp"], entry["mm"], entry["np"], entry["nm"],
                        noise, status, reason, g0, rec_stride, out,
                    )
            else:
                kernels.euler_window(
                    rho, ops.hmat, entry["g"], entry["g2"], entry["amp"],
                    config.dt, noise, status, reason, g0, rec_stride, out,
                    min_diag,
                )
            done += nseg
        if window_end is not None:
            window_end(wi, rho)
    _raise_failures(config, status, reason, seeds)


def evolve_recorded(
    config: EngineConfig,
    initial: np.ndarray,
    seeds: np.ndarray,
    *,
    n_half_windows: int | None = None,
    window_offset: int = 0,
    threads: int = 1,
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Evolve an ensemble and return states sampled every
    ``config.sample_stride`` steps, t = 0 included:
    shape (n_traj, n_samples, dim, dim).

    Pass a ``diagnostics`` dict to receive the most negative diagonal entry
    seen by the Euler stepper (positivity is tracked, never repaired).
    """
    dim = config.model.dim
    seeds = np.asarray(seeds, dtype=np.int64)
    n_traj = seeds.shape[0]
    rho = _broadcast_initial(initial, n_traj, dim)
    nw = config.n_half_windows if n_half_windows is None else n_half_windows
    total = nw * config.steps_per_half_window
    stride = config.sample_stride
    n_rec = total // stride
    states = np.empty((n_traj, n_rec + 1, dim, dim), dtype=np.complex128)
    states[:, 0] = rho
    min_diag = np.zeros(n_traj, dtype=np.float64)
    ops = _WindowOps(config)

    def chunk(lo: int, hi: int) -> None:
        _evolve_chunk(
            config, ops, rho[lo:hi], seeds[lo:hi],
            window_offset=window_offset, n_half_windows=nw,
            rec_stride=stride, rec_out=states[lo:hi, 1:],
            min_diag_out=min_diag[lo:hi],
        )

    _run_chunked(n_traj, threads, chunk)
    _fill_diagnostics(diagnostics, min_diag)
    return states


def _fill_diagnostics(diagnostics: dict | None, min_diag: np.ndarray) -> None:
    if diagnostics is None:
        return
    diagnostics["min_diagonal"] = float(min_diag.min())
    diagnostics["positivity_floor_violations"] = int(
        (min_diag < kernels.POSITIVITY_FLOOR).sum()
    )


def final_states(
    config: EngineConfig,
    initial: np.ndarray,
    seeds: np.ndarray,
    *,
    n_half_windows: int | None = None,
    window_offset: int = 0,
    threads: int = 1,
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Evolve an ensemble and return only the end states (n_traj, dim, dim)."""
    dim = config.model.dim
    seeds = np.asarray(seeds, dtype=np.int64)
    n_traj = seeds.shape[0]
    rho = _broadcast_initial(initial, n_traj, dim)
    nw = config.n_half_windows if n_half_windows is None else n_half_windows
    min_diag = np.zeros(n_traj, dtype=np.float64)
    ops = _WindowOps(config)

    def chunk(lo: int, hi: int) -> None:
        _evolve_chunk(
            config, ops, rho[lo:hi], seeds[lo:hi],
            window_offset=window_offset, n_half_windows=nw,
            min_diag_out=min_diag[lo:hi],
        )

    _run_chunked(n_traj, threads, chunk)
    _fill_diagnostics(diagnostics, min_diag)
    return rho


def window_end_probabilities(
    config: EngineConfig,
    initial: np.ndarray,
    seeds: np.ndarray,
    *,
    n_outcomes: int,
    observable: str = "z",
    threads: int = 1,
) -> np.ndarray:
    """Eigenstate probabilities at the end of each half-window measuring
    ``observable``: shape (n_traj, n_outcomes, dim).  The protocol runs
    n_outcomes full periods starting from the z window."""
    dim = config.model.dim
    seeds = np.asarray(seeds, dtype=np.int64)
    n_traj = seeds.shape[0]
    rho = _broadcast_initial(initial, n_traj, dim)
    projs = np.ascontiguousarray(np.stack(config.model.projectors(observable)))
    probs = np.empty((n_traj, n_outcomes, dim), dtype=np.float64)
    target_parity = 0 if observable == "z" else 1
    ops = _WindowOps(config)

    def chunk(lo: int, hi: int) -> None:
        local = rho[lo:hi]
        out = probs[lo:hi]

        def window_end(wi: int, states: np.ndarray) -> None:
            if wi % 2 == target_parity:
                kernels.window_end_probs(states, projs, out[:, wi // 2])

        _evolve_chunk(
            config, ops, local, seeds[lo:hi],
            window_offset=0, n_half_windows=2 * n_outcomes, window_end=window_end,
        )

    _run_chunked(n_traj, threads, chunk)
    return probs


def first_passage(
    config: EngineConfig,
    initial: np.ndarray,
    seeds: np.ndarray,
    *,
    observable: str = "z",
    target_labels: tuple[int, ...] = (1, -1),
    threshold: float = 0.9,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First time each trajectory's probability of any target eigenstate
    reaches ``threshold`` during a single measurement window of the chosen
    observable.

    Returns ``(times, labels, arrived)``; times are NaN and labels 0 where
    the threshold was never reached within the window.  A trajectory whose
    initial state already satisfies the threshold arrives at time 0.
    Kraus stepper only.
    """
    if config.stepper != "kraus":
        raise ValueError("first_passage is defined for the kraus stepper")
    dim = config.model.dim
    model = config.model
    seeds = np.asarray(seeds, dtype=np.int64)
    n_traj = seeds.shape[0]
    rho = _broadcast_initial(initial, n_traj, dim)
    idx = [model.labels.index(lab) for lab in target_labels]
    projs = np.ascontiguousarray(np.stack([model.projectors(observable)[i] for i in idx]))
    first_step = np.full(n_traj, -1, dtype=np.int64)
    first_target = np.zeros(n_traj, dtype=np.int64)
    # time-zero check
    p0 = np.einsum("bij,kji->bk", rho, projs).real
    hit0 = p0.max(axis=1) >= threshold
    first_step[hit0] = 0
    first_target[hit0] = p0[hit0].argmax(axis=1)
    window_offset = 0 if observable == "z" else 1
    ops = _WindowOps(config)

    def chunk(lo: int, hi: int) -> None:
        _evolve_chunk(
            config, ops, rho[lo:hi], seeds[lo:hi],
            window_offset=window_offset, n_half_windows=1,
            fp_args=(projs, threshold, first_step[lo:hi], first_target[lo:hi]),
        )

    _run_chunked(n_traj, threads, chunk)
    arrived = first_step >= 0
    times = np.where(arrived, first_step * config.dt, np.nan)
    labels = np.where(arrived, np.array(target_labels)[first_target], 0)
    return times, labels, arrived


def absorb_probe(
    config: EngineConfig,
    initial: np.ndarray,
    seeds: np.ndarray,
    *,
    observable: str = "x",
    floor: float = 1e-12,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one window of the chosen observable and track, per eigenstate,
    the largest probability seen after it first drops to ``floor``.

    Returns ``(crossed, max_after, end_states)`` with shapes
    (n_traj, dim), (n_traj, dim), (n_traj, dim, dim).  Kraus stepper only.
    """
    if config.stepper != "kraus":
        raise ValueError("absorb_probe is defined for the kraus stepper")
    dim = config.model.dim
    seeds = np.asarray(seeds, dtype=np.int64)
    n_traj = seeds.shape[0]
    rho = _broadcast_initial(initial, n_traj, dim)
    projs = np.ascontiguousarray(np.stack(config.model.projectors(observable)))
    crossed = np.zeros((n_traj, dim), dtype=np.int8)
    max_after = np.zeros((n_traj, dim), dtype=np.float64)
    window_offset = 0 if observable == "z" else 1
    ops = _WindowOps(config)

    def chunk(lo: int, hi: int) -> None:
        _evolve_chunk(
            config, ops, rho[lo:hi], seeds[lo:hi],
            window_offset=window_offset, n_half_windows=1,
            absorb_args=(projs, floor, crossed[lo:hi], max_after[lo:hi]),
        )

    _run_chunked(n_traj, threads, chunk)
    return crossed, max_after, rho
