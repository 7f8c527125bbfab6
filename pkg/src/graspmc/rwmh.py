"""Random-walk Metropolis-Hastings over poses and rough-sketch construction.

Positions move with a Gaussian step, orientations with a von Mises-Fisher
step around the current quaternion; the two are drawn independently.  Both
kernels are symmetric, so the acceptance ratio is the plain density ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from graspmc.geometry import Pose
from graspmc.targets import TargetDensity
from graspmc.vmf import vmf_sample

BIAS_LEVELS = ("impartial", "weak", "strong")


@dataclass(frozen=True)
class RwParams:
    pos_cov: np.ndarray = field(default_factory=lambda: 0.05 ** 2 * np.eye(3))
    kappa: float = 50.0

    def __post_init__(self):
        cov = np.array(self.pos_cov, dtype=float)
        if cov.shape != (3, 3) or not np.allclose(cov, cov.T):
            raise ValueError("pos_cov must be a symmetric 3x3 matrix")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        chol = np.linalg.cholesky(cov)  # raises unless SPD
        object.__setattr__(self, "pos_cov", cov)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def isotropic(cls, pos_std: float, kappa: float) -> RwParams:
        return cls(pos_std ** 2 * np.eye(3), kappa)


@dataclass(frozen=True)
class SketchSample:
    pose: Pose
    quality: float
    valid: bool


@dataclass
class Sketch:
    samples: list[SketchSample]
    bias: str

    @property
    def poses(self) -> list[Pose]:
        return [s.pose for s in self.samples]

    @property
    def n_valid(self) -> int:
        return sum(s.valid for s in self.samples)

    def __len__(self):
        return len(self.samples)


@dataclass
class RwState:
    current: Pose
    quality: float
    accepted: int = 0
    proposed: int = 0
    last_accepted: bool = False

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def rw_propose(x: Pose, params: RwParams, rng: np.random.Generator) -> Pose:
    """Draw order: 3 normals for the position, then the vMF draw."""
    pos = x.tra + params._chol @ rng.standard_normal(3)
    rot = vmf_sample(x.rot, params.kappa, rng)
    return Pose(rot, pos)


def rw_step(state: RwState, target: TargetDensity, params: RwParams,
            rng: np.random.Generator, record: list | None = None) -> RwState:
    """One MH step; every proposal is appended to ``record`` when given.

    Draw order: proposal, then one uniform (always drawn).
    """
    prop = rw_propose(state.current, params, rng)
    q = target.quality(prop)
    u = rng.random()
    state.proposed += 1
    if record is not None:
        record.append(SketchSample(prop, q, q > target.tau))
    if q <= 0.0:
        accept = False
    elif q >= state.quality:
        accept = True
    else:
        accept = u < q / state.quality
    if accept:
        state.current, state.quality = prop, q
        state.accepted += 1
    state.last_accepted = accept
    return state


def rw_chain(target: TargetDensity, start: Pose, steps: int, params: RwParams,
             rng: np.random.Generator):
    """Run ``steps`` RW-MH iterations; returns ``(chain, accepted_flags, state)``."""
    state = RwState(start, target.quality(start))
    chain, flags = [], []
    for _ in range(steps):
        rw_step(state, target, params, rng)
        chain.append(state.current)
        flags.append(state.last_accepted)
    return chain, flags, state


class SketchError(RuntimeError):
    pass


def build_sketch(target: TargetDensity, demos: list[Pose], bias: str, count: int,
                 params: RwParams, rng: np.random.Generator,
                 restart_every: int = 100, max_draws: int | None = None) -> Sketch:
    """Rough sketch of the target from recorded random-walk proposals.

    The walk starts at ``demos[0]`` and records every proposal, accepted or
    not.  The bias level then fixes which valid grasps survive:

    * ``impartial``: none (invalid proposals only);
    * ``weak``: only the demonstrations themselves;
    * ``strong``: at least ``ceil(count / 2)`` valid proposals, collected by
      restarting the walk from a random demonstration every
      ``restart_every`` steps.
    """
    if bias not in BIAS_LEVELS:
        raise ValueError(f"bias must be one of {BIAS_LEVELS}, got {bias!r}")
    if not demos:
        raise ValueError("need at least one demonstrated grasp")
    m = len(demos)
    if bias != "impartial" and count < m:
        raise ValueError(f"sketch count {count} smaller than number of demos {m}")
    max_draws = 1000 * count if max_draws is None else max_draws
    state = RwState(demos[0], target.quality(demos[0]))
    record: list[SketchSample] = []

    if bias == "strong":
        need_valid = math.ceil(count / 2)
        n_valid = 0
        while n_valid < need_valid or len(record) < count:
            if len(record) >= max_draws:
                raise SketchError(f"strong sketch: only {n_valid} valid grasps in {max_draws} draws")
            if record and len(record) % restart_every == 0:
                d = demos[int(rng.integers(m))]
                state = RwState(d, target.quality(d))
            rw_step(state, target, params, rng, record)
            n_valid += record[-1].valid
        keep_valid = set()
        for i, s in enumerate(record):
            if s.valid and len(keep_valid) < need_valid:
                keep_valid.add(i)
        rest = [i for i in range(len(record)) if i not in keep_valid][: count - len(keep_valid)]
        chosen = sorted(keep_valid.union(rest))
        samples = [record[i] for i in chosen]
    else:
        n_invalid_needed = count if bias == "impartial" else count - m
        invalid: list[SketchSample] = []
        while len(invalid) < n_invalid_needed:
            if len(record) >= max_draws:
                raise SketchError(f"{bias} sketch: only {len(invalid)} invalid proposals in "
                                  f"{max_draws} draws")
            rw_step(state, target, params, rng, record)
            if not record[-1].valid:
                invalid.append(record[-1])
        samples = invalid
        if bias == "weak":
            samples = samples + [SketchSample(d, target.quality(d), True) for d in demos]

    sketch = Sketch(samples, bias)
    _check_bias(sketch, count, demos, target)
    return sketch


def _check_bias(sketch: Sketch, count: int, demos, target) -> None:
    assert len(sketch) == count, (len(sketch), count)
    if sketch.bias == "impartial":
        assert sketch.n_valid == 0
    elif sketch.bias == "weak":
        valid = [s.pose for s in sketch.samples if s.valid]
        assert len(valid) == len(demos) and all(v is d for v, d in zip(valid, demos))
    else:
        assert sketch.n_valid >= math.ceil(count / 2)
