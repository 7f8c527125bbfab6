"""Darting moves between elliptical jump regions around demonstrated grasps.

A region is an ellipsoid ``{x : ||S^{-1/2} U^T (x - mu)|| <= omega}`` in the
ambient embedding, where ``U S U^T`` is the covariance of the chain history
assigned to the region's mode.  A dart maps standardized coordinates ``u`` in
the source region to ``-u`` in the destination region (an involution); the
destination is drawn with probability proportional to region volume, which
makes the Jacobian cancel in the acceptance ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from graspmc.geometry import DegenerateProjectionError, Pose, align_rows, align_sign, embed, project
from graspmc.geometry import d_mag_linearized_sq_batch
from graspmc.kameleon import ChainState, KameleonParams, kameleon_step
from graspmc.targets import TargetDensity

EIG_FLOOR = 1e-10
MIN_REGION_SAMPLES = 8
FALLBACK_VARIANCE = 1e-4
ACCEPTANCE_MODES = ("standard", "paper_literal")


@dataclass(frozen=True)
class DartingParams:
    p_check: float = 0.5
    omega: float = 0.7
    acceptance_mode: str = "standard"
    literal_volume: bool = False
    assign_c: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.p_check <= 1.0:
            raise ValueError("p_check must lie in [0, 1]")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if self.acceptance_mode not in ACCEPTANCE_MODES:
            raise ValueError(f"acceptance_mode must be one of {ACCEPTANCE_MODES}")


@dataclass(frozen=True, eq=False)
class JumpRegion:
    """Ellipsoid around ``center`` (an ambient vector; 7-d for poses).

    ``basis`` columns are the covariance eigenvectors, ``eigvals`` the matching
    variances (floored at ``1e-10``).
    """

    center: np.ndarray
    basis: np.ndarray
    eigvals: np.ndarray
    omega: float
    literal_volume: bool = False
    volume: float = field(init=False)
    log_volume: float = field(init=False)

    def __post_init__(self):
        lam = np.maximum(np.asarray(self.eigvals, dtype=float), EIG_FLOOR)
        object.__setattr__(self, "eigvals", lam)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "basis", np.asarray(self.basis, dtype=float))
        lv = log_region_volume(lam, self.omega, self.literal_volume)
        object.__setattr__(self, "log_volume", lv)
        object.__setattr__(self, "volume", math.exp(lv))

    @property
    def dim(self) -> int:
        return len(self.eigvals)

    @property
    def center_pose(self) -> Pose:
        return project(self.center)

    def _ambient(self, x) -> np.ndarray:
        v = embed(x) if isinstance(x, Pose) else np.asarray(x, dtype=float)
        return align_sign(v, self.center) if self.dim == 7 else v

    def standardize(self, x) -> np.ndarray:
        return (self.basis.T @ (self._ambient(x) - self.center)) / np.sqrt(self.eigvals)

    def radius(self, x) -> float:
        return float(np.linalg.norm(self.standardize(x)))


def log_region_volume(eigvals, omega: float, literal: bool = False) -> float:
    lam = np.asarray(eigvals, dtype=float)
    d = len(lam)
    log_axes = np.log(lam).sum() if literal else 0.5 * np.log(lam).sum()
    return 0.5 * d * math.log(math.pi) + d * math.log(omega) + log_axes - math.lgamma(1 + 0.5 * d)


def region_volume(region: JumpRegion) -> float:
    """``pi^{d/2} omega^d prod sqrt(lambda_i) / Gamma(1 + d/2)``, the volume of
    the ellipsoid with semi-axes ``omega * sqrt(lambda_i)``.  With
    ``literal_volume`` the square root is dropped."""
    return math.exp(log_region_volume(region.eigvals, region.omega, region.literal_volume))


def make_region(center, cov, omega: float, literal_volume: bool = False) -> JumpRegion:
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    U, s, _ = np.linalg.svd(cov)
    return JumpRegion(np.asarray(center, dtype=float), U, s, omega, literal_volume)


def build_regions(modes, history, omega: float, c: float = 10.0,
                  literal_volume: bool = False) -> list[JumpRegion]:
    """One region per mode from the ambient chain history ``(N, 7)``.

    Each history pose is assigned to its nearest mode (linearized distance
    with translation weight ``c``); a region's covariance is that of its
    assigned poses with quaternion signs aligned to the centre.  Fewer than 8
    assigned poses falls back to the whole history, fewer than 8 history
    poses to ``1e-4 I``.
    """
    if len(modes) == 0:
        raise ValueError("need at least one mode")
    if isinstance(history, ChainState):
        history = history.history.array
    hist = np.asarray(history, dtype=float).reshape(-1, 7)
    centers = np.array([embed(m) if isinstance(m, Pose) else np.asarray(m, float) for m in modes])
    if len(hist):
        d2 = np.stack([d_mag_linearized_sq_batch(ctr, hist, c) for ctr in centers])
        owner = np.argmin(d2, axis=0)
    regions = []
    for k, ctr in enumerate(centers):
        if len(hist) < MIN_REGION_SAMPLES:
            cov = FALLBACK_VARIANCE * np.eye(7)
        else:
            rows = hist[owner == k]
            if len(rows) < MIN_REGION_SAMPLES:
                rows = hist
            cov = np.cov(align_rows(rows, ctr), rowvar=False)
        regions.append(make_region(ctr, cov, omega, literal_volume))
    return regions


def contains(region: JumpRegion, x) -> bool:
    return region.radius(x) <= region.omega


def count_containing(regions, x) -> int:
    return sum(contains(r, x) for r in regions)


def select_region(regions, rng: np.random.Generator) -> int:
    """Categorical draw with probability proportional to volume (one uniform)."""
    logv = np.array([r.log_volume for r in regions])
    w = np.exp(logv - logv.max())
    cdf = np.cumsum(w / w.sum())
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), len(regions) - 1)


def dart_ambient(x, src: JumpRegion, dst: JumpRegion) -> np.ndarray:
    """``mu_dst - U_dst S_dst^{1/2} S_src^{-1/2} U_src^T (x - mu_src)``."""
    u = src.standardize(x)
    return dst.center - dst.basis @ (np.sqrt(dst.eigvals) * u)


def dart(x, src: JumpRegion, dst: JumpRegion) -> Pose:
    return project(dart_ambient(x, src, dst))


def dart_accept(x: Pose, x_new: Pose, regions, target: TargetDensity, mode: str,
                rng: np.random.Generator, log_pi_x: float | None = None,
                log_pi_new: float | None = None) -> bool:
    """Darting acceptance; draws exactly one uniform.

    ``standard``: accept with probability
    ``min(1, pi(x_new) n(x) / (pi(x) n(x_new)))``.
    ``paper_literal``: accept iff ``u > min(1, n(x) pi(x) / (n(x_new) pi(x_new)))``.
    """
    u = rng.random()
    lp = target.log_density(x) if log_pi_x is None else log_pi_x
    lp_new = target.log_density(x_new) if log_pi_new is None else log_pi_new
    n_x = count_containing(regions, x)
    n_new = count_containing(regions, x_new)
    if mode == "standard":
        if lp_new == -math.inf or n_new == 0:
            return False
        if lp == -math.inf:
            return True
        log_ratio = lp_new - lp + math.log(max(n_x, 1)) - math.log(n_new)
        return log_ratio >= 0.0 or u < math.exp(log_ratio)
    if mode == "paper_literal":
        if lp_new == -math.inf or n_new == 0:
            return False  # ratio is +inf, min is 1, u > 1 never holds
        if lp == -math.inf or n_x == 0:
            return u > 0.0
        log_ratio = lp - lp_new + math.log(n_x) - math.log(n_new)
        return u > (1.0 if log_ratio >= 0.0 else math.exp(log_ratio))
    raise ValueError(f"unknown acceptance mode {mode!r}")


def combined_step(state: ChainState, target: TargetDensity, regions, kparams: KameleonParams,
                  dparams: DartingParams, rng: np.random.Generator) -> ChainState:
    """Kameleon step with probability ``p_check``, otherwise a dart attempt.

    Draw order: ``u1`` (only when ``0 < p_check < 1``), then either the
    Kameleon draws or, when the current state lies inside a region, one
    uniform to pick the source among containing regions, one for the
    destination and one for acceptance.  Outside every region the state is
    held.  Exactly one state is appended to the history.
    """
    p = dparams.p_check
    if p >= 1.0:
        local = True
    elif p <= 0.0:
        local = False
    else:
        local = rng.random() < p
    if local:
        return kameleon_step(state, target, kparams, rng)

    x = state.current
    inside = [i for i, r in enumerate(regions) if contains(r, x)]
    if not inside:
        state.holds += 1
        state.advance(x, state.log_pi, False, "hold")
        return state

    state.dart_attempts += 1
    src = regions[inside[min(int(rng.random() * len(inside)), len(inside) - 1)]]
    dst = regions[select_region(regions, rng)]
    try:
        x_new = dart(x, src, dst)
    except DegenerateProjectionError:
        x_new = None
    if x_new is None or count_containing(regions, x_new) == 0:
        rng.random()  # keep the acceptance draw in the stream
        state.advance(x, state.log_pi, False, "dart")
        return state
    lp_new = target.log_density(x_new)
    if dart_accept(x, x_new, regions, target, dparams.acceptance_mode, rng,
                   log_pi_x=state.log_pi, log_pi_new=lp_new):
        state.dart_accepted += 1
        state.advance(x_new, lp_new, True, "dart")
    else:
        state.advance(x, state.log_pi, False, "dart")
    return state
