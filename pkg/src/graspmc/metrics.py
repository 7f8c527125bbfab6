"""Success counting, convex-hull dispersion and cross-run aggregation."""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from graspmc.geometry import Pose, d_mag_linearized_sq_batch, embed
from graspmc.targets import TargetDensity

DEDUP_DIST = 1e-6
DEDUP_C = 1.0
COPLANAR_TOL = 1e-12


@dataclass
class RunMetrics:
    success_count: int
    unique_success_count: int
    acceptance_rate: float
    dispersion_area: float
    c_value: float
    bias: str
    seed: int
    dispersion_degenerate: bool = False
    basins_visited: int | None = None
    target: str = ""

    def __post_init__(self):
        if not self.success_count >= self.unique_success_count >= 0:
            raise ValueError("need success_count >= unique_success_count >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AggregateRow:
    target: str
    bias: str
    n_runs: int
    mean_success: float
    std_success: float
    mean_unique: float
    std_unique: float
    mean_dispersion: float


def unique_poses(poses: list[Pose], tol: float = DEDUP_DIST) -> list[Pose]:
    """Greedy dedup: a pose is new if its linearized distance (translation
    weight 1) to every kept pose exceeds ``tol``."""
    kept: list[Pose] = []
    rows = np.empty((len(poses), 7))
    for p in poses:
        v = embed(p)
        if kept and np.min(d_mag_linearized_sq_batch(v, rows[: len(kept)], DEDUP_C)) <= tol * tol:
            continue
        rows[len(kept)] = v
        kept.append(p)
    return kept


def success_poses(chain, target: TargetDensity) -> list[Pose]:
    return [p for p in chain if target.is_success(p)]


def count_successes(chain, target: TargetDensity) -> tuple[int, int]:
    """``(success_count, unique_success_count)`` over the given chain states."""
    succ = success_poses(chain, target)
    return len(succ), len(unique_poses(succ))


def convex_hull_area(points) -> tuple[float, bool]:
    """Surface area of the 3-D convex hull; ``(0.0, True)`` when degenerate
    (fewer than 4 distinct points, or all within 1e-12 of a plane)."""
    from scipy.spatial import ConvexHull
    from scipy.spatial import QhullError

    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 3), axis=0)
    if len(pts) < 4:
        return 0.0, True
    centered = pts - pts.mean(axis=0)
    normal = np.linalg.svd(centered, full_matrices=False)[2][-1]
    if np.max(np.abs(centered @ normal)) <= COPLANAR_TOL:
        return 0.0, True
    try:
        return float(ConvexHull(pts).area), False
    except QhullError:
        return 0.0, True


def basins_visited(chain, target) -> int | None:
    """Number of distinct modes hosting at least one successful state, for
    targets exposing ``basin``; ``None`` otherwise."""
    basin = getattr(target, "basin", None)
    if basin is None:
        return None
    seen = {basin(p) for p in chain}
    seen.discard(None)
    return len(seen)


def run_metrics(chain, target: TargetDensity, acceptance_rate: float, c_value: float,
                bias: str, seed: int) -> RunMetrics:
    succ = success_poses(chain, target)
    uniq = unique_poses(succ)
    area, degenerate = convex_hull_area([p.tra for p in uniq]) if uniq else (0.0, True)
    return RunMetrics(len(succ), len(uniq), acceptance_rate, area, c_value, bias, seed,
                      degenerate, basins_visited(chain, target), getattr(target, "name", ""))


def _sample_std(xs) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def aggregate(runs) -> list[AggregateRow]:
    """Per (target, bias) mean and sample (n-1) standard deviation."""
    groups = defaultdict(list)
    for r in runs:
        groups[(r.target, r.bias)].append(r)
    order = {"impartial": 0, "weak": 1, "strong": 2}
    rows = []
    for (target, bias), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], order.get(kv[0][1], 9), kv[0][1])):
        s = [r.success_count for r in rs]
        u = [r.unique_success_count for r in rs]
        rows.append(AggregateRow(target, bias, len(rs), statistics.fmean(s), _sample_std(s),
                                 statistics.fmean(u), _sample_std(u),
                                 statistics.fmean(r.dispersion_area for r in rs)))
    return rows


def format_table(rows: list[AggregateRow]) -> str:
    """Aligned plain-text table, ``mean (std)`` per bias level."""
    header = ["target", "bias", "runs", "successes", "unique", "dispersion_m2"]
    body = [[r.target, r.bias, str(r.n_runs), f"{r.mean_success:.1f} ({r.std_success:.1f})",
             f"{r.mean_unique:.1f} ({r.std_unique:.1f})", f"{r.mean_dispersion:.3g}"] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(x.ljust(w) for x, w in zip(row, widths)) for row in body]
    return "\n".join(lines) + "\n"


def acceptance_rate(flags) -> float:
    flags = list(flags)
    return sum(flags) / len(flags) if flags else math.nan
