"""Nonnegative grasp-quality oracles and the targets they define.

A target only has to provide ``quality(pose) >= 0``; the sampler works with
``log_density = log(quality)`` and counts a pose as a successful grasp when
``quality > tau``.  The shipped oracles are analytic stand-ins for a
simulator-based quality measure: multimodal, position/orientation coupled,
and (for the ring) with hard zero regions.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from graspmc.geometry import Pose, axis_angle, d_mag_linearized_sq_batch, embed, qrotate
from graspmc.vmf import vmf_sample


class TargetDensity(ABC):
    """Unnormalised density ``pi(g) = quality(g)`` over poses."""

    name: str = "target"
    tau: float = 0.0

    @abstractmethod
    def quality(self, g: Pose) -> float:
        ...

    def log_density(self, g: Pose) -> float:
        q = self.quality(g)
        return math.log(q) if q > 0.0 else -math.inf

    def is_success(self, g: Pose) -> bool:
        return self.quality(g) > self.tau


def log_density(target: TargetDensity, g: Pose) -> float:
    return target.log_density(g)


def is_success(target: TargetDensity, g: Pose) -> bool:
    return target.is_success(g)


class TrackedTarget(TargetDensity):
    """Wraps a target, counting evaluations and keeping the running sum of
    observed qualities (a diagnostic estimate of the normalisation constant;
    never used in acceptance ratios)."""

    def __init__(self, inner: TargetDensity):
        self.inner = inner
        self.name = inner.name
        self.tau = inner.tau
        self.evaluations = 0
        self.quality_sum = 0.0

    def quality(self, g: Pose) -> float:
        q = self.inner.quality(g)
        self.evaluations += 1
        self.quality_sum += q
        return q

    def __getattr__(self, item):
        if item == "inner":
            raise AttributeError(item)
        return getattr(self.inner, item)


# -- mixture of pose-Gaussians ------------------------------------------------


@dataclass(frozen=True)
class Mode:
    center: Pose
    weight: float = 1.0
    scale: float = 0.1


class MixtureTarget(TargetDensity):
    """``quality(g) = sum_k w_k exp(-d_lin(g, mu_k)^2 / (2 s_k^2))``.

    ``c`` weighs translation inside ``d_lin``; it belongs to the oracle and is
    unrelated to the kernel's translation weight.
    """

    def __init__(self, modes: Sequence[Mode], c: float = 50.0, tau: float | None = None,
                 name: str = "mixture"):
        if not modes:
            raise ValueError("MixtureTarget needs at least one mode")
        for m in modes:
            if not (m.weight > 0 and m.scale > 0):
                raise ValueError("mode weights and scales must be > 0")
        if c < 0:
            raise ValueError("c must be >= 0")
        self.modes = list(modes)
        self.c = float(c)
        self.tau = 0.05 * min(m.weight for m in modes) if tau is None else float(tau)
        self.name = name
        self._centers = np.array([embed(m.center) for m in modes])
        self._weights = np.array([m.weight for m in modes])
        self._inv2s2 = np.array([1.0 / (2.0 * m.scale ** 2) for m in modes])

    def quality(self, g: Pose) -> float:
        d2 = d_mag_linearized_sq_batch(embed(g), self._centers, self.c)
        return float(self._weights @ np.exp(-d2 * self._inv2s2))

    def nearest_mode(self, g: Pose) -> int:
        d2 = d_mag_linearized_sq_batch(embed(g), self._centers, self.c)
        return int(np.argmin(d2))

    def basin(self, g: Pose) -> int | None:
        """Index of the mode a successful pose belongs to, ``None`` otherwise."""
        if not self.is_success(g):
            return None
        return self.nearest_mode(g)


# -- cylinder ring ------------------------------------------------------------


class CylinderRingTarget(TargetDensity):
    """Grasps around an upright cylinder (axis = z, centred at the origin).

    Nonzero only when the gripper position lies in the shell
    ``r + gap_min <= rho <= r + gap_max``, ``|z| <= h/2`` and the closing axis
    (the pose's local x-axis) points at the cylinder axis within
    ``theta_tol``.  Quality is a parabolic radial window times the normalised
    alignment ``(cos(err) - cos(theta_tol)) / (1 - cos(theta_tol))``.
    """

    def __init__(self, radius: float = 0.05, height: float = 0.12, gap_min: float = 0.01,
                 gap_max: float = 0.04, theta_tol: float = 0.22, tau: float = 0.0,
                 name: str = "ring"):
        if not (radius > 0 and height > 0 and 0 <= gap_min < gap_max and 0 < theta_tol < math.pi):
            raise ValueError("invalid cylinder ring geometry")
        self.radius = radius
        self.height = height
        self.gap_min = gap_min
        self.gap_max = gap_max
        self.theta_tol = theta_tol
        self.tau = tau
        self.name = name
        self._cos_tol = math.cos(theta_tol)

    def radial_window(self, rho: float) -> float:
        u = (rho - self.radius - self.gap_min) / (self.gap_max - self.gap_min)
        if u < 0.0 or u > 1.0:
            return 0.0
        return 4.0 * u * (1.0 - u)

    def quality(self, g: Pose) -> float:
        x, y, z = g.tra
        if abs(z) > 0.5 * self.height:
            return 0.0
        rho = math.hypot(x, y)
        win = self.radial_window(rho)
        if win <= 0.0:
            return 0.0
        closing = qrotate(g.rot, np.array([1.0, 0.0, 0.0]))
        cos_err = -(closing[0] * x + closing[1] * y) / rho
        align = (cos_err - self._cos_tol) / (1.0 - self._cos_tol)
        return float(win * align) if align > 0.0 else 0.0

    def shell_volume(self) -> float:
        r0 = self.radius + self.gap_min
        r1 = self.radius + self.gap_max
        return math.pi * (r1 * r1 - r0 * r0) * self.height


# -- demonstrations -----------------------------------------------------------


class DemoGenerationError(RuntimeError):
    pass


def generate_demo_grasps(target: TargetDensity, seed_positions, m: int,
                         rng: np.random.Generator, budget: int = 500,
                         initial_orientations=None,
                         kappa_range: tuple[float, float] = (0.5, 2000.0)) -> list[Pose]:
    """Hill-climb the orientation at each fixed seed position.

    Each step perturbs the quaternion with a vMF draw whose concentration
    grows geometrically over ``kappa_range``; moves that do not lower quality
    are kept (ties allowed, so flat zero regions are walked).  Returns the
    ``m`` best successful poses, highest quality first.
    """
    seed_positions = [np.asarray(p, dtype=float) for p in seed_positions]
    if m > len(seed_positions):
        raise ValueError(f"need m <= number of seed positions ({m} > {len(seed_positions)})")
    kappas = np.geomspace(kappa_range[0], kappa_range[1], max(budget - 1, 1))
    found = []
    for i, pos in enumerate(seed_positions):
        rot = (np.asarray(initial_orientations[i], dtype=float) if initial_orientations is not None
               else np.array([1.0, 0.0, 0.0, 0.0]))
        best = Pose(rot, pos)
        best_q = target.quality(best)
        for kappa in kappas:
            cand = Pose(vmf_sample(best.rot, kappa, rng), pos)
            q = target.quality(cand)
            if q >= best_q:
                best, best_q = cand, q
        if best_q > target.tau:
            found.append((best_q, i, best))
    if len(found) < m:
        raise DemoGenerationError(
            f"only {len(found)} of {len(seed_positions)} seeds reached quality > tau "
            f"({target.tau:g}); need {m}")
    found.sort(key=lambda t: (-t[0], t[1]))
    return [p for _, _, p in found[:m]]


# -- shipped targets ----------------------------------------------------------


@dataclass
class TargetSpec:
    factory: Callable[..., TargetDensity]
    seed_positions: list = field(default_factory=list)
    description: str = ""


def single_mode_target(c: float = 50.0, scale: float = 0.1) -> MixtureTarget:
    center = Pose(axis_angle([0, 0, 1], math.pi / 3), [0.1, 0.0, 0.0])
    return MixtureTarget([Mode(center, 1.0, scale)], c=c, name="single_mode")


def tri_mode_target(c: float = 150.0, scale: float = 0.1) -> MixtureTarget:
    modes = [
        Mode(Pose(axis_angle([0, 0, 1], math.pi / 2), [0.12, 0.0, 0.0]), 1.0, scale),
        Mode(Pose(axis_angle([1, 0, 0], math.pi / 3), [-0.06, 0.10, 0.0]), 0.8, scale),
        Mode(Pose(axis_angle([0, 1, 0], -math.pi / 4), [-0.06, -0.10, 0.05]), 0.6, scale),
    ]
    return MixtureTarget(modes, c=c, name="tri_mode")


def handle_target(c: float = 50.0, scale: float = 0.1, n_modes: int = 5,
                  spacing: float = 0.05, twist: float = math.pi / 6) -> MixtureTarget:
    """Elongated ridge: modes along the x-axis whose orientation twists about
    the handle as the position moves outwards."""
    modes = []
    for i in range(n_modes):
        rot = axis_angle([1, 0, 0], twist * (i - (n_modes - 1) / 2))
        modes.append(Mode(Pose(rot, [0.1 + spacing * i, 0.0, 0.02]), 1.0, scale))
    return MixtureTarget(modes, c=c, name="handle")


def ring_target(**kw) -> CylinderRingTarget:
    return CylinderRingTarget(**kw)


def _ring_seeds(n=7, rho=0.075):
    return [[rho * math.cos(2 * math.pi * k / n), rho * math.sin(2 * math.pi * k / n), 0.0]
            for k in range(n)]


TARGETS: dict[str, TargetSpec] = {
    "tri_mode": TargetSpec(
        tri_mode_target,
        [[0.125, 0.005, 0.0], [0.115, -0.005, 0.005], [-0.055, 0.105, 0.0],
         [-0.065, 0.095, 0.005], [-0.055, -0.105, 0.05]],
        "three well-separated pose modes of unequal weight"),
    "handle": TargetSpec(
        handle_target,
        [[0.105, 0.0, 0.02], [0.15, 0.005, 0.02], [0.205, 0.0, 0.025],
         [0.245, -0.005, 0.02], [0.3, 0.0, 0.015]],
        "twisting ridge of overlapping modes along a handle"),
    "ring": TargetSpec(ring_target, _ring_seeds(), "continuum of grasps around a cylinder"),
    "single_mode": TargetSpec(single_mode_target, [[0.1, 0.0, 0.0]] * 5,
                              "one pose mode (calibration)"),
}

SHIPPED = ("tri_mode", "handle", "ring")


def make_target(name: str, **params) -> TargetDensity:
    if name not in TARGETS:
        raise KeyError(f"unknown target {name!r}; available: {', '.join(sorted(TARGETS))}")
    return TARGETS[name].factory(**params)
