"""Trajectory post-processing: eigenstate classification, dwell-time
statistics, cumulative phase-space densities, collapse-time statistics, and
the two-eigenstate superposition loci that bound the avoided petal regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import EngineConfig, TrajectoryRecord
from .spin import SpinModel

__all__ = [
    "INCOMPLETE",
    "born_probabilities",
    "classify_eigenstate",
    "classify_probabilities",
    "OutcomeSequence",
    "outcome_sequence",
    "DwellStats",
    "dwell_times",
    "Histogram2D",
    "accumulate_density",
    "CollapseTimeStats",
    "collapse_times",
    "cascade_trace",
    "superposition_loci",
    "petal_polygons",
    "points_in_polygon",
    "polygon_distance",
]

#: outcome label used when no eigenstate probability reaches 1 - eps
INCOMPLETE = -128


def born_probabilities(model: SpinModel, rho: np.ndarray, observable: str) -> np.ndarray:
    """p_i = Tr(rho P_i) in the model's eigenstate order, clipped to [0, 1]
    and renormalized; raises when the raw probabilities miss unit sum by
    more than 1e-6."""
    projs = model.projectors(observable)
    p = np.array([np.trace(rho @ pk).real for pk in projs])
    defect = abs(p.sum() - 1.0)
    if defect > 1e-6:
        raise ValueError(f"eigenstate probabilities sum to 1 {defect:.3g} off")
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum()


def classify_probabilities(probs: np.ndarray, labels: tuple[int, ...], eps: float) -> np.ndarray:
    """Vectorized window classification: rows of ``probs`` map to the label
    whose probability is at least 1 - eps, else INCOMPLETE."""
    if not 0.0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    probs = np.atleast_2d(probs)
    best = probs.argmax(axis=-1)
    ok = probs.max(axis=-1) >= 1.0 - eps
    lab = np.asarray(labels, dtype=np.int64)[best]
    return np.where(ok, lab, INCOMPLETE)


def classify_eigenstate(
    model: SpinModel, rho: np.ndarray, observable: str, eps: float = 1e-3
) -> int | None:
    """Label of the eigenstate adopted by ``rho`` (probability >= 1 - eps),
    or None when the measurement is incomplete at that tolerance."""
    p = born_probabilities(model, rho, observable)
    out = int(classify_probabilities(p, model.labels, eps)[0])
    return None if out == INCOMPLETE else out


@dataclass(frozen=True)
class OutcomeSequence:
    """One classified outcome per z half-window, in window order."""

    labels: np.ndarray  # int64; INCOMPLETE marks unresolved windows
    eps: float

    def __len__(self) -> int:
        return len(self.labels)


def outcome_sequence(
    traj: TrajectoryRecord, model: SpinModel, eps: float = 1e-3
) -> OutcomeSequence:
    """Classify the state at the final sample of each z half-window."""
    config = traj.config
    per_win = config.steps_per_half_window // config.sample_stride
    n_windows = config.n_half_windows // 2
    # z window w ends at sample index (2w + 1) * per_win
    idx = (2 * np.arange(n_windows) + 1) * per_win
    if idx[-1] >= traj.eig_probs_z.shape[0]:
        raise ValueError("trajectory record does not cover every z window end")
    probs = traj.eig_probs_z[idx]
    return OutcomeSequence(labels=classify_probabilities(probs, model.labels, eps), eps=eps)


@dataclass
class DwellStats:
    """Run-length statistics of an outcome sequence, mergeable across
    trajectories (concatenation in merge order)."""

    run_lengths: dict[int, list[int]] = field(default_factory=dict)
    n_outcomes: int = 0
    n_incomplete: int = 0

    def merge(self, other: "DwellStats") -> "DwellStats":
        out = DwellStats(
            run_lengths={k: list(v) for k, v in self.run_lengths.items()},
            n_outcomes=self.n_outcomes + other.n_outcomes,
            n_incomplete=self.n_incomplete + other.n_incomplete,
        )
        for k, v in other.run_lengths.items():
            out.run_lengths.setdefault(k, []).extend(v)
        return out

    def count(self, label: int) -> int:
        return len(self.run_lengths.get(label, ()))

    def mean(self, label: int) -> float:
        runs = self.run_lengths.get(label, ())
        return float(np.mean(runs)) if runs else float("nan")

    def stderr(self, label: int) -> float:
        runs = self.run_lengths.get(label, ())
        if len(runs) < 2:
            return float("nan")
        return float(np.std(runs, ddof=1) / np.sqrt(len(runs)))


def dwell_times(seq: OutcomeSequence | np.ndarray) -> DwellStats:
    """Maximal runs of identical labels.  A run completes when a different
    label (or an incomplete window) follows it; the final, unterminated run
    is excluded.  Incomplete windows never start a run."""
    labels = seq.labels if isinstance(seq, OutcomeSequence) else np.asarray(seq)
    stats = DwellStats(n_outcomes=len(labels))
    current = INCOMPLETE
    length = 0
    for lab in labels:
        lab = int(lab)
        if lab == INCOMPLETE:
            stats.n_incomplete += 1
            if current != INCOMPLETE:
                stats.run_lengths.setdefault(current, []).append(length)
            current, length = INCOMPLETE, 0
            continue
        if lab == current:
            length += 1
            continue
        if current != INCOMPLETE:
            stats.run_lengths.setdefault(current, []).append(length)
        current, length = lab, 1
    # the trailing run never terminated; drop it
    return stats


@dataclass
class Histogram2D:
    """Integer-count histogram over a fixed rectangle, exactly mergeable."""

    counts: np.ndarray
    x_edges: np.ndarray
    y_edges: np.ndarray

    @classmethod
    def empty(
        cls,
        bins: int = 200,
        x_range: tuple[float, float] = (-1.0, 1.0),
        y_range: tuple[float, float] = (-1.0, 1.0),
    ) -> "Histogram2D":
        return cls(
            counts=np.zeros((bins, bins), dtype=np.int64),
            x_edges=np.linspace(x_range[0], x_range[1], bins + 1),
            y_edges=np.linspace(y_range[0], y_range[1], bins + 1),
        )

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_area(self) -> float:
        return float((self.x_edges[1] - self.x_edges[0]) * (self.y_edges[1] - self.y_edges[0]))

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            0.5 * (self.x_edges[:-1] + self.x_edges[1:]),
            0.5 * (self.y_edges[:-1] + self.y_edges[1:]),
        )

    def add(self, xs: np.ndarray, ys: np.ndarray) -> None:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        slack = 1e-9
        for vals, edges, name in ((xs, self.x_edges, "x"), (ys, self.y_edges, "y")):
            if vals.size and (
                vals.min() < edges[0] - slack or vals.max() > edges[-1] + slack
            ):
                raise ValueError(f"{name} samples fall outside the histogram range")
        xs = np.clip(xs, self.x_edges[0], self.x_edges[-1])
        ys = np.clip(ys, self.y_edges[0], self.y_edges[-1])
        h, _, _ = np.histogram2d(xs, ys, bins=(self.x_edges, self.y_edges))
        self.counts += h.astype(np.int64)

    def merge(self, other: "Histogram2D") -> "Histogram2D":
        if self.counts.shape != other.counts.shape or not (
            np.array_equal(self.x_edges, other.x_edges)
            and np.array_equal(self.y_edges, other.y_edges)
        ):
            raise ValueError("histogram grids differ")
        return Histogram2D(self.counts + other.counts, self.x_edges, self.y_edges)

    def density(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / (total * self.bin_area)

    def mass_in_disk(self, center: tuple[float, float], radius: float) -> int:
        cx, cy = self.centers()
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        mask = (gx - center[0]) ** 2 + (gy - center[1]) ** 2 <= radius**2
        return int(self.counts[mask].sum())

    def mass_in_polygon(self, polygon: np.ndarray, margin: float = 0.0) -> int:
        cx, cy = self.centers()
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        inside = points_in_polygon(pts, polygon)
        if margin > 0.0:
            inside &= polygon_distance(pts, polygon) >= margin
        return int(self.counts.ravel()[inside].sum())


def accumulate_density(
    samples: np.ndarray, bins: int = 200, hist: Histogram2D | None = None
) -> Histogram2D:
    """Bin (x, z) phase-plane samples (shape (n, 2)); pass ``hist`` to keep
    accumulating into an existing grid."""
    if hist is None:
        hist = Histogram2D.empty(bins=bins)
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    hist.add(samples[:, 0], samples[:, 1])
    return hist


@dataclass(frozen=True)
class CollapseTimeStats:
    """First-passage summary for a set of target eigenstates."""

    threshold: float
    times: dict[int, np.ndarray]
    n_trajectories: int
    non_arrivals: int

    def mean(self, label: int | None = None) -> float:
        t = self._pool(label)
        return float(t.mean()) if t.size else float("nan")

    def stderr(self, label: int | None = None) -> float:
        t = self._pool(label)
        if t.size < 2:
            return float("nan")
        return float(t.std(ddof=1) / np.sqrt(t.size))

    def count(self, label: int | None = None) -> int:
        return int(self._pool(label).size)

    def _pool(self, label: int | None) -> np.ndarray:
        if label is not None:
            return self.times.get(label, np.empty(0))
        if not self.times:
            return np.empty(0)
        return np.concatenate(list(self.times.values()))


def collapse_times(
    config: EngineConfig,
    initial: np.ndarray,
    observable: str,
    targets: tuple[int, ...],
    threshold: float,
    n_trajectories: int,
    threads: int = 1,
) -> CollapseTimeStats:
    """Monte Carlo first-passage times to the target eigenstates during a
    single measurement window of ``observable``.

    Non-arrivals (threshold never reached within the half-period window) are
    excluded from the means and reported separately.
    """
    from .ensemble import first_passage, trajectory_seeds

    if n_trajectories <= 0:
        raise ValueError("n_trajectories must be positive")
    if not 0.5 < threshold < 1.0:
        raise ValueError("threshold must lie in (0.5, 1)")
    seeds = trajectory_seeds(config.seed, n_trajectories)
    times, labels, arrived = first_passage(
        config, initial, seeds,
        observable=observable, target_labels=tuple(targets),
        threshold=threshold, threads=threads,
    )
    per_target = {
        lab: np.sort(times[arrived & (labels == lab)]) for lab in targets
    }
    return CollapseTimeStats(
        threshold=threshold,
        times=per_target,
        n_trajectories=n_trajectories,
        non_arrivals=int((~arrived).sum()),
    )


def cascade_trace(
    traj: TrajectoryRecord, model: SpinModel, observable: str = "x"
) -> tuple[np.ndarray, np.ndarray]:
    """(times, per-eigenstate probabilities) along one trajectory, for
    plotting collapse cascades and checking the absorbing-zero property."""
    probs = traj.eig_probs_x if observable == "x" else traj.eig_probs_z
    return traj.times, probs


# ---------------------------------------------------------------------------
# Two-eigenstate superposition loci and petal regions (spin 1)
# ---------------------------------------------------------------------------


def _pair_curve(model: SpinModel, observable: str, pair: tuple[int, int], n: int) -> np.ndarray:
    """(<S_x>, <S_z>) along real superpositions cos(t)|i> + sin(t)|j>."""
    vecs = model.eigvecs_z if observable == "z" else model.eigvecs_x
    vi = vecs[model.labels.index(pair[0])]
    vj = vecs[model.labels.index(pair[1])]
    sx, _, sz = model.s_ops
    thetas = np.linspace(0.0, np.pi, n)
    out = np.empty((n, 2))
    for i, th in enumerate(thetas):
        psi = np.cos(th) * vi + np.sin(th) * vj
        out[i, 0] = np.vdot(psi, sx @ psi).real
        out[i, 1] = np.vdot(psi, sz @ psi).real
    return out


def superposition_loci(kind: str, n: int = 361, model: SpinModel | None = None):
    """Sampled (<S_x>, <S_z>) curves of real two-eigenstate superpositions.

    kind "z_pair": the (+1, 0) and (-1, 0) z-eigenstate ellipses;
    kind "x_pair": the (+1, 0) and (-1, 0) x-eigenstate ellipses;
    kind "axis":   the (+1, -1) superpositions of each observable (the
    vertical and horizontal diameters).  Spin 1 only.
    """
    from .spin import build_model

    if model is None:
        model = build_model("one")
    if model.spin != "one":
        raise ValueError("superposition loci are defined for the spin-1 model")
    if kind == "z_pair":
        return {
            "z(+1,0)": _pair_curve(model, "z", (1, 0), n),
            "z(-1,0)": _pair_curve(model, "z", (-1, 0), n),
        }
    if kind == "x_pair":
        return {
            "x(+1,0)": _pair_curve(model, "x", (1, 0), n),
            "x(-1,0)": _pair_curve(model, "x", (-1, 0), n),
        }
    if kind == "axis":
        return {
            "z(+1,-1)": _pair_curve(model, "z", (1, -1), n),
            "x(+1,-1)": _pair_curve(model, "x", (1, -1), n),
        }
    raise ValueError(f"unknown locus kind {kind!r}")


def petal_polygons(n: int = 200, model: SpinModel | None = None) -> list[np.ndarray]:
    """Closed polygons bounding the four avoided petal regions.

    Each petal is the lens between one z-pair ellipse and one x-pair
    ellipse; the two arcs meet at the origin and at (2/3, 2/3) up to sign.
    The first-quadrant petal is built from the explicit superposition
    states, the rest by reflection symmetry.
    """
    from .spin import build_model

    if model is None:
        model = build_model("one")
    # z-pair (+1, 0): (sqrt2 c s, c^2); from the origin (theta = pi/2) to the
    # crossing with the x-pair (+1, 0) ellipse at cos(theta)^2 = 2/3
    theta_star = np.arccos(np.sqrt(2.0 / 3.0))
    tz = np.linspace(np.pi / 2.0, theta_star, n)
    arc_z = _curve_points(model, "z", (1, 0), tz)
    tx = np.linspace(theta_star, np.pi / 2.0, n)
    arc_x = _curve_points(model, "x", (1, 0), tx)
    quad1 = np.vstack([arc_z, arc_x[1:]])
    return [
        quad1,
        quad1 * np.array([-1.0, 1.0]),
        quad1 * np.array([-1.0, -1.0]),
        quad1 * np.array([1.0, -1.0]),
    ]


def _curve_points(model, observable, pair, thetas) -> np.ndarray:
    vecs = model.eigvecs_z if observable == "z" else model.eigvecs_x
    vi = vecs[model.labels.index(pair[0])]
    vj = vecs[model.labels.index(pair[1])]
    sx, _, sz = model.s_ops
    out = np.empty((len(thetas), 2))
    for i, th in enumerate(thetas):
        psi = np.cos(th) * vi + np.sin(th) * vj
        out[i, 0] = np.vdot(psi, sx @ psi).real
        out[i, 1] = np.vdot(psi, sz @ psi).real
    return out


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd (ray-cast) point-in-polygon test, vectorized over points."""
    pts = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polygon, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    x1, y1 = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for ax, ay, bx, by in zip(x1, y1, x2, y2):
        crosses = (ay > y) != (by > y)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (x < x_cross)
    return inside


def polygon_distance(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Distance from each point to the polygon boundary (edge segments)."""
    pts = np.asarray(points, dtype=np.float64)
    poly = np.asarray(polygon, dtype=np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ab2 = np.maximum((ab**2).sum(axis=1), 1e-300)
    best = np.full(len(pts), np.inf)
    for i in range(len(a)):
        ap = pts - a[i]
        t = np.clip((ap @ ab[i]) / ab2[i], 0.0, 1.0)
        proj = a[i] + t[:, None] * ab[i]
        d = np.sqrt(((pts - proj) ** 2).sum(axis=1))
        best = np.minimum(best, d)
    return best
