"""Trajectory engine: incremental Kraus stepper, Euler-Maruyama stepper,
deterministic noise streams, and the exact ensemble-mean propagator.

Dynamics
--------
A single measurement channel with operator L advances the state in a step dt
by one of the two Kraus operators

    M_pm = (I + A_pm) / sqrt(2),   A_pm = -i H dt - (1/2) L^dag L dt pm L sqrt(dt),

the branch drawn with probability p_pm = Tr(M_pm rho M_pm^dag) (normalized
over the pair), followed by renormalization.  This map preserves trace and
positivity at every step and converges weakly, as dt -> 0, to the diffusion

    drho = -i[H, rho] dt + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2) dt
           + sum_k (rho L_k^dag + L_k rho - Tr[rho(L_k + L_k^dag)] rho) dW_k,

which the Euler stepper integrates directly with Gaussian increments.  The
ensemble mean of either stepper solves the deterministic master equation
implemented exactly in :func:`lindblad_propagate`.

Noise contract
--------------
A :class:`NoiseSource` is a PCG64 stream; trajectory i of an ensemble uses
seed ``base_seed + i``.  Per step, the Kraus stepper consumes one uniform per
active channel and the Euler stepper one standard normal per active channel,
in channel order.  Channels with zero amplitude consume nothing.  Identical
seeds therefore give bit-identical trajectories regardless of batch size or
thread count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from . import kernels
from .linalg import dagger, hermitian_defect
from .schedule import MeasurementSchedule
from .spin import SpinModel

__all__ = [
    "EngineError",
    "PositivityWarning",
    "NoiseSource",
    "EngineConfig",
    "TrajectoryRecord",
    "kraus_operators",
    "kraus_step",
    "euler_step",
    "run_trajectory",
    "lindblad_propagate",
]

Stepper = Literal["kraus", "euler"]


class EngineError(RuntimeError):
    """A stepper produced an unusable state (invalid branch probabilities
    or a non-positive trace)."""


class PositivityWarning(UserWarning):
    """Diagnostic for Euler states whose diagonal dipped below the -1e-6
    floor; the state is reported, never projected back to positivity."""


@dataclass
class NoiseSource:
    """Deterministic pseudo-random stream backing one trajectory."""

    seed: int
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def normals(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)


def validate_state(rho: np.ndarray, what: str = "state") -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise ValueError(f"{what} trace deviates from 1 by more than 1e-9")
    if hermitian_defect(rho) > 1e-9:
        raise ValueError(f"{what} is not Hermitian within 1e-9")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-8:
        raise ValueError(f"{what} has an eigenvalue below -1e-8")
    return rho


def kraus_operators(
    h: np.ndarray, channel: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """The incremental Kraus pair (M_plus, M_minus) for one channel."""
    dim = channel.shape[0]
    a_common = -1j * h * dt - 0.5 * (dagger(channel) @ channel) * dt
    spread = channel * np.sqrt(dt)
    m_plus = (np.eye(dim) + a_common + spread) / np.sqrt(2.0)
    m_minus = (np.eye(dim) + a_common - spread) / np.sqrt(2.0)
    return m_plus, m_minus


def _normalize_hermitian(x: np.ndarray) -> np.ndarray:
    tr = np.trace(x).real
    if not (tr > 0.0 and np.isfinite(tr)):
        raise EngineError(f"state trace {tr!r} is not positive")
    return 0.5 * (x + x.conj().T) / tr


def kraus_step(
    rho: np.ndarray,
    h: np.ndarray | None,
    channels: Sequence[np.ndarray],
    dt: float,
    noise: NoiseSource,
) -> np.ndarray:
    """One incremental Kraus transition.

    Channels are applied sequentially within the step (exact for the
    alternating protocol, where at most one channel is active at a time).
    Consumes one uniform per channel.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    dim = rho.shape[0]
    if h is None:
        h = np.zeros((dim, dim), dtype=np.complex128)
    if not channels:
        if np.any(h):
            channels = [np.zeros((dim, dim), dtype=np.complex128)]
        else:
            return rho.copy()
    out = rho
    for channel in channels:
        m_plus, m_minus = kraus_operators(h, channel, dt)
        x_plus = m_plus @ out @ dagger(m_plus)
        x_minus = m_minus @ out @ dagger(m_minus)
        p_plus = np.trace(x_plus).real
        p_minus = np.trace(x_minus).real
        total = p_plus + p_minus
        if not (total > 0.0 and np.isfinite(total)):
            raise EngineError(f"branch probabilities sum to {total!r}")
        u = noise.uniforms(1)[0] if np.any(channel) else 0.0
        out = _normalize_hermitian(x_plus if u < p_plus / total else x_minus)
    return out


def euler_step(
    rho: np.ndarray,
    h: np.ndarray | None,
    channels: Sequence[np.ndarray],
    dt: float,
    noise: NoiseSource,
) -> np.ndarray:
    """One Euler-Maruyama increment of the diffusion, re-hermitized and
    renormalized.  Positivity is not guaranteed per step and is never
    repaired; an excursion beyond the -1e-6 floor emits a
    ``PositivityWarning`` diagnostic.  Consumes one standard normal per
    channel."""
    rho = np.asarray(rho, dtype=np.complex128)
    delta = np.zeros_like(rho)
    if h is not None and np.any(h):
        delta += -1j * (h @ rho - rho @ h) * dt
    for channel in channels:
        ld = dagger(channel)
        delta += (channel @ rho @ ld - 0.5 * (ld @ channel @ rho + rho @ ld @ channel)) * dt
        dw = (noise.normals(1)[0] if np.any(channel) else 0.0) * np.sqrt(dt)
        mean = np.trace(rho @ (channel + ld)).real
        delta += (rho @ ld + channel @ rho - mean * rho) * dw
    out = _normalize_hermitian(rho + delta)
    worst = np.diag(out).real.min()
    if worst < kernels.POSITIVITY_FLOOR:
        warnings.warn(
            f"Euler state diagonal reached {worst:.3e} (below "
            f"{kernels.POSITIVITY_FLOOR})",
            PositivityWarning,
            stacklevel=2,
        )
    return out


def lindblad_propagate(
    rho0: np.ndarray,
    h: np.ndarray | None,
    channels: Sequence[np.ndarray],
    t: float,
) -> np.ndarray:
    """Exact ensemble-mean state at time t for constant H and channels, via
    the matrix exponential of the (d^2 x d^2) master-equation superoperator.
    Serves as the oracle for ensemble averages of either stepper."""
    rho0 = np.asarray(rho0, dtype=np.complex128)
    dim = rho0.shape[0]
    eye = np.eye(dim)
    sup = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    if h is not None and np.any(h):
        sup += -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for channel in channels:
        ld_l = dagger(channel) @ channel
        sup += np.kron(channel.conj(), channel)
        sup -= 0.5 * (np.kron(eye, ld_l) + np.kron(ld_l.T, eye))
    vec = rho0.reshape(-1, order="F")
    out = scipy.linalg.expm(sup * t) @ vec
    return out.reshape(dim, dim, order="F")


# ---------------------------------------------------------------------------
# Protocol configuration and the single-trajectory runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EngineConfig:
    """Full specification of one alternating-measurement run."""

    model: SpinModel
    schedule: MeasurementSchedule
    dt: float
    duration: float
    stepper: Stepper = "kraus"
    seed: int = 0
    sample_stride: int = 10
    hamiltonian: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        period = self.schedule.period
        if self.dt > period / 20 + 1e-15:
            raise ValueError("dt must not exceed period/20")
        half = period / 2.0 / self.dt
        if abs(half - round(half)) > 1e-6 or round(half) < 1:
            raise ValueError("dt must divide the half-period evenly")
        n_periods = self.duration / period
        if abs(n_periods - round(n_periods)) > 1e-9 or round(n_periods) < 1:
            raise ValueError("duration must be a positive multiple of the period")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.steps_per_half_window % self.sample_stride != 0:
            raise ValueError("sample_stride must divide the steps per half-window")
        if self.stepper not in ("kraus", "euler"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.hamiltonian is not None:
            hmat = np.asarray(self.hamiltonian, dtype=np.complex128)
            if hmat.shape != (self.model.dim, self.model.dim):
                raise ValueError("hamiltonian dimension does not match the model")
            if hermitian_defect(hmat) > 1e-10:
                raise ValueError("hamiltonian must be Hermitian")

    @property
    def steps_per_half_window(self) -> int:
        return int(round(self.schedule.period / 2.0 / self.dt))

    @property
    def n_half_windows(self) -> int:
        return 2 * int(round(self.duration / self.schedule.period))

    @property
    def total_steps(self) -> int:
        return self.steps_per_half_window * self.n_half_windows

    def window_channel(self, w: int) -> tuple[float, np.ndarray]:
        """(amplitude, generator) active during half-window w (0-based; even
        windows measure the z observable, odd windows the x observable)."""
        if w % 2 == 0:
            return self.schedule.a_max, self.model.meas_ops[0]
        return self.schedule.b_max, self.model.meas_ops[1]

    def h_matrix(self) -> np.ndarray:
        if self.hamiltonian is None:
            return np.zeros((self.model.dim, self.model.dim), dtype=np.complex128)
        return np.asarray(self.hamiltonian, dtype=np.complex128)


@dataclass
class TrajectoryRecord:
    """Sampled observables along one trajectory.

    ``times[k]`` is the time of sample k (t = 0 included); rows of the
    probability arrays follow the model's eigenstate order (+1[, 0], -1).
    """

    times: np.ndarray
    spin_xyz: np.ndarray
    eig_probs_z: np.ndarray
    eig_probs_x: np.ndarray
    coherence: np.ndarray
    final_state: np.ndarray
    config: EngineConfig


def _record_from_states(config: EngineConfig, states: np.ndarray) -> TrajectoryRecord:
    from .spin import PAULI_X, PAULI_Y, PAULI_Z, gell_mann_basis

    model = config.model
    n = states.shape[0]
    times = np.arange(n) * (config.sample_stride * config.dt)
    pz = np.stack(model.projectors_z)
    px = np.stack(model.projectors_x)
    s_ops = np.stack(model.s_ops)
    spin_xyz = np.einsum("nij,sji->ns", states, s_ops).real
    eig_z = np.einsum("nij,kji->nk", states, pz).real
    eig_x = np.einsum("nij,kji->nk", states, px).real
    if model.spin == "half":
        basis = np.stack([PAULI_X, PAULI_Y, PAULI_Z])
        coherence = np.einsum("nij,kji->nk", states, basis).real
    else:
        basis = np.stack(gell_mann_basis())
        coherence = 0.5 * np.sqrt(3.0) * np.einsum("nij,kji->nk", states, basis).real
    return TrajectoryRecord(
        times=times,
        spin_xyz=spin_xyz,
        eig_probs_z=eig_z,
        eig_probs_x=eig_x,
        coherence=coherence,
        final_state=states[-1].copy(),
        config=config,
    )


def run_trajectory(config: EngineConfig, initial: np.ndarray) -> TrajectoryRecord:
    """Evolve one trajectory through the alternating protocol, sampling every
    ``sample_stride`` steps (the t = 0 state included).  Deterministic in
    (config, initial)."""
    from .ensemble import evolve_recorded  # local import: ensemble builds on engine

    initial = validate_state(np.asarray(initial, dtype=np.complex128), "initial state")
    states = evolve_recorded(config, initial[None, :, :], np.array([config.seed]))
    return _record_from_states(config, states[0])
