"""Acceptance suite: every quantitative target at its stated tolerance.

Each test prints one PASS/FAIL line (run ``pytest -s`` to see them inline).
Monte Carlo checks use fixed seeds, so the suite is deterministic; sample
sizes follow the stated targets.  Independent oracles (Born-chain
enumeration, exit-time boundary-value solve, exact propagator) live in this
file, separate from the simulation paths they check.
"""

import numpy as np
import pytest

from qsdsim import analysis
from qsdsim.analysis import INCOMPLETE
from qsdsim.engine import lindblad_propagate
from qsdsim.spin import (
    SUSPECT_RATE_TERMS,
    build_model,
    cross_validate_coherence_rates,
    preset_state,
)
from qsdsim import experiments as ex

THREADS = 2


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def born_chain_return_probabilities():
    """Enumerate the two-step Born chain for the spin-1 strong-strong
    protocol: collapse to an x eigenstate with the Born weights of the
    current z eigenstate, then back.  Returns {z label: return probability}."""
    one = build_model("one")
    p_x_given_z = {}
    p_z_given_x = {}
    for i, z_lab in enumerate(one.labels):
        rho = one.projectors_z[i]
        p_x_given_z[z_lab] = [
            np.trace(rho @ px).real for px in one.projectors_x
        ]
    for j, x_lab in enumerate(one.labels):
        rho = one.projectors_x[j]
        p_z_given_x[x_lab] = [
            np.trace(rho @ pz).real for pz in one.projectors_z
        ]
    out = {}
    for i, z_lab in enumerate(one.labels):
        out[z_lab] = sum(
            p_x_given_z[z_lab][j] * p_z_given_x[x_lab][i]
            for j, x_lab in enumerate(one.labels)
        )
    return out


def exit_time_bvp(g: float, threshold: float, p0: float = 0.5, n: int = 100_001) -> float:
    """Mean first-exit time of the Born-probability martingale
    dp = 4 g p (1-p) dW from p0 to {1-threshold, threshold}, by solving the
    mean-exit boundary-value problem 0.5 sigma^2 T'' = -1 on a grid."""
    lo, hi = 1.0 - threshold, threshold
    p = np.linspace(lo, hi, n)
    h = p[1] - p[0]
    rhs = -2.0 * h * h / (4.0 * g * p[1:-1] * (1.0 - p[1:-1])) ** 2
    nn = n - 2
    cp = np.zeros(nn)
    dp = np.zeros(nn)
    cp[0] = -0.5
    dp[0] = -0.5 * rhs[0]
    for i in range(1, nn):
        denom = -2.0 - cp[i - 1]
        cp[i] = 1.0 / denom
        dp[i] = (rhs[i] - dp[i - 1]) / denom
    t = np.zeros(nn)
    t[-1] = dp[-1]
    for i in range(nn - 2, -1, -1):
        t[i] = dp[i] - cp[i] * t[i + 1]
    return float(np.interp(p0, p, np.concatenate([[0.0], t, [0.0]])))


def test_oracle_self_checks():
    ret = born_chain_return_probabilities()
    assert abs(ret[1] - 3 / 8) <= 1e-12
    assert abs(ret[0] - 1 / 2) <= 1e-12
    assert abs(ret[-1] - 3 / 8) <= 1e-12
    # closed-form cross-check of the BVP solver at threshold 0.9
    f = lambda q: -np.log(q) - np.log(1 - q) + 2 * q * np.log(q) + 2 * (1 - q) * np.log(1 - q)
    assert abs(exit_time_bvp(1.0, 0.9) - f(0.9) / 8.0) <= 1e-4
    assert abs(exit_time_bvp(0.5, 0.9) - f(0.9) / 2.0) <= 1e-4


# ---------------------------------------------------------------------------
# P1 state invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("system", ["spin_half", "spin_one"])
def test_p1_state_invariants(system):
    probe = ex.state_invariant_probe(
        system, n_traj=25, m=8.0, dt=1e-4, period=2.0, seed=101, threads=THREADS
    )
    assert probe["steps"] >= 500_000  # 1e6 total across the two systems
    ok = (
        probe["max_trace_defect"] <= 1e-12
        and probe["max_hermiticity_defect"] <= 1e-12
        and probe["min_eigenvalue"] >= -1e-10
    )
    report(
        "P1",
        ok,
        f"{system}: {probe['states_checked']} states, trace defect "
        f"{probe['max_trace_defect']:.2e}, herm defect "
        f"{probe['max_hermiticity_defect']:.2e}, min eig {probe['min_eigenvalue']:.2e}",
    )


# ---------------------------------------------------------------------------
# P2 Born-rule collapse fractions
# ---------------------------------------------------------------------------


def test_p2_born_rule():
    res = ex.born_collapse(
        system="spin_one", initial="eig_z(-1)", observable="x",
        m=32.0, n_traj=10_000, dt=2.5e-4, eps=1e-3, seed=202, threads=THREADS,
    )
    freqs = res["frequencies"]
    expected = {1: 0.25, 0: 0.50, -1: 0.25}
    ok = res["complete_fraction"] >= 0.999 and all(
        abs(freqs[lab] - mu) <= 0.02 for lab, mu in expected.items()
    )
    report(
        "P2",
        ok,
        "collapse frequencies "
        + ", ".join(f"{lab:+d}: {freqs[lab]:.4f}" for lab in (1, 0, -1))
        + f" (complete {res['complete_fraction']:.4f})",
    )


# ---------------------------------------------------------------------------
# P3 martingale / zero drift
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("system", ["spin_half", "spin_one"])
def test_p3_martingale(system):
    res = ex.martingale_drift(system, m_z=1.0, n_traj=10_000, seed=303, threads=THREADS)
    ratio = np.abs(res["mean_delta"][1:]) / res["stderr"][1:]
    ok = bool(np.nanmax(ratio) <= 3.0)
    report("P3", ok, f"{system}: max |mean drift| = {np.nanmax(ratio):.2f} standard errors")


# ---------------------------------------------------------------------------
# P4 ensemble mean against the exact propagator
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("system", ["spin_half", "spin_one"])
@pytest.mark.parametrize("stepper", ["kraus", "euler"])
def test_p4_ensemble_mean(system, stepper):
    res = ex.lindblad_mean(
        system, stepper, amp=1.0, t_final=0.5, n_traj=10_000, dt=2.5e-4,
        seed=404, threads=THREADS,
    )
    ok = res["worst_margin"] <= 0.0
    detail = f"{system}/{stepper}: max entry deviation {res['max_deviation']:.2e}"
    if system == "spin_half" and stepper == "kraus":
        # special case: mean coherence decays as exp(-2 a^2 t)
        sx = 2 * build_model("half").s_ops[0]
        r_x = np.einsum("nij,ji->n", res["mean_states"], sx).real
        r0 = np.einsum("ij,ji->", res["initial"].astype(complex), sx).real
        expect = r0 * np.exp(-2.0 * res["times"])
        se = 2 * np.einsum("nij->n", res["stderr"]).real  # loose bound on SE(r_x)
        dev = np.abs(r_x - expect)
        ok = ok and bool(np.all(dev <= np.maximum(5 * se, 5e-3)))
        detail += f", r_x decay max dev {dev.max():.2e}"
    report("P4", ok, detail)


# ---------------------------------------------------------------------------
# P5 stepper equivalence in distribution
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("system", ["spin_half", "spin_one"])
def test_p5_stepper_ks(system):
    res = ex.stepper_ks(
        system, m_z=0.5, n_traj=10_000, period=0.5, dt=1e-4, seed=505,
        threads=THREADS,
    )
    ok = res["ks_distance"] <= 0.05
    report("P5", ok, f"{system}: KS distance {res['ks_distance']:.4f} at mid-window")


# ---------------------------------------------------------------------------
# P6 / P7 dwell times
# ---------------------------------------------------------------------------

M_X_SWEEP = (32.0, 2.0, 0.5, 0.125)


@pytest.fixture(scope="module")
def dwell_results():
    out = {}
    for system in ("spin_half", "spin_one"):
        for m_x in M_X_SWEEP:
            out[(system, m_x)] = ex.dwell_experiment(
                system, m_x, m_z=32.0, n_traj=20, outcomes_per_traj=250,
                period=2.0, dt=2.5e-4, seed=606, threads=THREADS,
            )
    return out


def test_p6_strong_strong_dwell(dwell_results):
    ret = born_chain_return_probabilities()
    oracle_one = {lab: 1.0 / (1.0 - p) for lab, p in ret.items()}
    assert abs(oracle_one[1] - 1.6) <= 1e-12 and abs(oracle_one[0] - 2.0) <= 1e-12

    stats_half = dwell_results[("spin_half", 32.0)].stats(eps=1e-3)
    ok = all(abs(stats_half.mean(lab) - 2.0) <= 0.1 for lab in (1, -1))
    detail = (
        f"spin_half means {stats_half.mean(1):.3f}/{stats_half.mean(-1):.3f} "
        f"(target 2.0 +- 0.1)"
    )
    stats_one = dwell_results[("spin_one", 32.0)].stats(eps=1e-3)
    ok = ok and all(abs(stats_one.mean(lab) - 1.6) <= 0.1 for lab in (1, -1))
    ok = ok and abs(stats_one.mean(0) - 2.0) <= 0.15
    detail += (
        f"; spin_one means {stats_one.mean(1):.3f}/{stats_one.mean(0):.3f}/"
        f"{stats_one.mean(-1):.3f} (targets 1.60/2.00/1.60)"
    )
    report("P6", ok, detail)


def test_p6_classification_tolerance_insensitivity(dwell_results):
    # the strong-z regime makes dwell means insensitive to the
    # classification tolerance
    for system in ("spin_half", "spin_one"):
        base = dwell_results[(system, 32.0)].stats(eps=1e-3)
        for eps in (1e-2, 1e-4):
            other = dwell_results[(system, 32.0)].stats(eps=eps)
            for lab in base.run_lengths:
                assert abs(other.mean(lab) - base.mean(lab)) <= 0.02 * base.mean(lab)


def test_p7_dwell_monotonicity_and_splitting(dwell_results):
    ok = True
    details = []
    for system in ("spin_half", "spin_one"):
        labels = build_model(_key(system)).labels
        means = {
            m_x: dwell_results[(system, m_x)].stats(eps=1e-3) for m_x in M_X_SWEEP
        }
        for lab in labels:
            series = [means[m_x].mean(lab) for m_x in M_X_SWEEP]
            mono = all(series[i] <= series[i + 1] + 1e-12 for i in range(len(series) - 1))
            ok = ok and mono
            details.append(f"{system} {lab:+d}: " + "/".join(f"{v:.2f}" for v in series))
    # spin-1 splitting at weak x measurement: the +-1 eigenstates dwell
    # longer than the 0 eigenstate by at least 3 sigma
    for m_x in (0.5, 0.125):
        stats = dwell_results[("spin_one", m_x)].stats(eps=1e-3)
        runs_pm = stats.run_lengths.get(1, []) + stats.run_lengths.get(-1, [])
        mean_pm = float(np.mean(runs_pm))
        se_pm = float(np.std(runs_pm, ddof=1) / np.sqrt(len(runs_pm)))
        sep = mean_pm - stats.mean(0)
        sigma = np.hypot(se_pm, stats.stderr(0))
        ok = ok and sep >= 3.0 * sigma
        details.append(
            f"spin_one M_x={m_x}: dwell(+-1)-dwell(0) = {sep:.2f} = {sep / sigma:.1f} sigma"
        )
    report("P7", ok, "; ".join(details))


def _key(system):
    return {"spin_half": "half", "spin_one": "one"}[system]


def test_p7_companion_spin_half_closed_form(dwell_results):
    # independent pipeline oracle: during an x window the z coherence mean
    # decays by exp(-2 M_x), so outcomes form a two-state chain with return
    # probability (1 + exp(-2 M_x))/2.  Simulating that label chain with the
    # same run-length estimator (20 trajectories x 250 outcomes, open final
    # run dropped) gives the expected measured mean including truncation.
    rng = np.random.default_rng(2024)
    for m_x in M_X_SWEEP:
        p_ret = 0.5 * (1.0 + np.exp(-2.0 * m_x))
        reps = []
        for _ in range(400):
            runs = []
            for _ in range(20):
                stay = rng.random(249) < p_ret
                labels = np.empty(250, dtype=np.int8)
                labels[0] = 1
                for i in range(1, 250):
                    labels[i] = labels[i - 1] if stay[i - 1] else -labels[i - 1]
                stats = analysis.dwell_times(labels)
                runs.extend(stats.run_lengths.get(1, []))
                runs.extend(stats.run_lengths.get(-1, []))
            reps.append(np.mean(runs))
        oracle_mean = float(np.mean(reps))
        oracle_sd = float(np.std(reps, ddof=1))
        stats = dwell_results[("spin_half", m_x)].stats(eps=1e-3)
        runs = stats.run_lengths.get(1, []) + stats.run_lengths.get(-1, [])
        measured = float(np.mean(runs))
        assert abs(measured - oracle_mean) <= max(3.5 * oracle_sd, 0.02 * oracle_mean), (
            f"M_x={m_x}: measured {measured:.3f} vs chain oracle "
            f"{oracle_mean:.3f} +- {oracle_sd:.3f}"
        )


# ---------------------------------------------------------------------------
# P8 collapse times
# ---------------------------------------------------------------------------


def test_p8_collapse_times():
    # arrival threshold 0.9: the target means 0.22/0.89 correspond to this
    # criterion; they are reproduced here and
    # cross-checked against the exit-time oracle below)
    a = ex.collapse_time_experiment(
        initial="eig_x(0)", targets=(1, -1), amp=1.0, window=6.0,
        threshold=0.9, n_traj=10_000, dt=1e-3, seed=707, threads=THREADS,
    )
    b = ex.collapse_time_experiment(
        initial="superpos_z(-1,0)", targets=(-1, 0), amp=1.0, window=12.0,
        threshold=0.9, n_traj=10_000, dt=1e-3, seed=717, threads=THREADS,
    )
    ok = (
        abs(a.mean() - 0.22) <= 0.3 * 0.22
        and abs(b.mean() - 0.89) <= 0.3 * 0.89
        and a.non_arrivals == 0
    )
    report(
        "P8",
        ok,
        f"first-passage means {a.mean():.4f} (target 0.22 +- 30%) and "
        f"{b.mean():.4f} (target 0.89 +- 30%); non-arrivals {a.non_arrivals}/{b.non_arrivals}",
    )


def test_p8_exit_time_oracle_threshold_dependence():
    # the first-passage mean follows the exit-time solve at any threshold;
    # at 0.999 the same runs give ~0.86 and ~3.45, which is why 0.9 is the
    # arrival criterion matching the 0.22/0.89 targets
    cases = [
        ("eig_x(0)", (1, -1), 1.0, 0.9, 6.0),
        ("eig_x(0)", (1, -1), 1.0, 0.999, 6.0),
        ("superpos_z(-1,0)", (-1, 0), 0.5, 0.9, 12.0),
        ("superpos_z(-1,0)", (-1, 0), 0.5, 0.999, 24.0),
    ]
    for initial, targets, g_eff, threshold, window in cases:
        oracle = exit_time_bvp(g_eff, threshold)
        stats = ex.collapse_time_experiment(
            initial=initial, targets=targets, amp=1.0, window=window,
            threshold=threshold, n_traj=2000, dt=5e-4, seed=727, threads=THREADS,
        )
        dev = abs(stats.mean() - oracle) / oracle
        assert dev <= 0.08, (
            f"{initial} at threshold {threshold}: mean {stats.mean():.4f} vs "
            f"oracle {oracle:.4f}"
        )


# ---------------------------------------------------------------------------
# P9 cascade absorbing property
# ---------------------------------------------------------------------------


def test_p9_cascade_absorbing():
    res = ex.cascade_probe(
        m_x=32.0, n_traj=1000, dt=2.5e-4, floor=1e-12, eps=1e-3, seed=808,
        threads=THREADS,
    )
    assert np.allclose(res["initial_probs"], [0.25, 0.5, 0.25], atol=1e-12)
    ok = (
        res["n_crossed"] >= 500  # zero crossings actually happen
        and res["max_prob_after_zero"] <= 1e-9
        and res["one_hot_fraction"] >= 0.99
    )
    report(
        "P9",
        ok,
        f"{res['n_crossed']}/1000 windows crossed 1e-12; max probability "
        f"after zero {res['max_prob_after_zero']:.2e}; one-hot fraction "
        f"{res['one_hot_fraction']:.3f}",
    )


# ---------------------------------------------------------------------------
# P10 density structure
# ---------------------------------------------------------------------------


def _density_ratio(m: float, seed: int) -> tuple[float, float]:
    hist = ex.density_experiment(
        "spin_one", m=m, duration=500.0, n_traj=1, period=2.0, dt=1e-4,
        sample_stride=10, bins=200, seed=seed, threads=1,
    )
    summ = ex.density_summaries(hist, "spin_one")
    masses = summ["eigenstate_mass"]
    outer = [masses[k] for k in ("z_plus", "z_minus", "x_plus", "x_minus")]
    return masses["center"] / np.mean(outer), summ["petal_fraction"]


def test_p10_density_structure():
    # Known-red criterion, kept as stated (see the README's known-failure
    # note).  The center disk holds the two slow-collapsing eigenstates: at
    # strength 8 the settling transient (fraction ~ F/(2 M gap^2) of each
    # window, independent of the period) provably depresses the radius-0.1
    # mass ratio to ~1.4, so the factor-two target is only reached in the
    # strong-measurement limit; the companion test quantifies both regimes.
    ratio, petal_fraction = _density_ratio(8.0, 909)
    ok = abs(ratio - 2.0) <= 0.3 and petal_fraction <= 0.01
    report(
        "P10",
        ok,
        f"center/outer mass ratio {ratio:.2f} (target 2.0 +- 0.3 at strength 8); "
        f"petal mass fraction {petal_fraction:.4%} (limit 1%)",
    )


def test_p10_companion_settling_model():
    # the occupancy factor two emerges once settling transients are
    # negligible (strength 32); at strength 8 the measured ratio sits in the
    # settling-depressed band.  Petal avoidance holds in both regimes.
    ratio_8, petal_8 = _density_ratio(8.0, 909)
    ratio_32, petal_32 = _density_ratio(32.0, 909)
    assert 1.2 <= ratio_8 <= 1.55, ratio_8
    assert abs(ratio_32 - 2.0) <= 0.3, ratio_32
    assert petal_8 <= 0.01 and petal_32 <= 0.01
    print(
        f"[P10-companion] PASS: ratio {ratio_8:.2f} at strength 8 -> "
        f"{ratio_32:.2f} at strength 32 (settling deficit ~ 1/M)"
    )


# ---------------------------------------------------------------------------
# P11 explicit coherence-rate table cross-check
# ---------------------------------------------------------------------------


def test_p11_coherence_rate_cross_check():
    rep = cross_validate_coherence_rates(samples=1000, seed=111, tolerance=1e-10)
    suspects = {f"{p}:{c}": f"{v:.3e}" for (p, c), v in rep.suspect_deviation.items()}
    max_matched = max(
        v for k, v in rep.max_deviation.items() if k not in SUSPECT_RATE_TERMS
    )
    ok = rep.matched and set(rep.suspect_deviation) == set(SUSPECT_RATE_TERMS)
    report(
        "P11",
        ok,
        f"matched components deviate <= {max_matched:.2e}; reported suspect "
        f"terms {suspects}",
    )
