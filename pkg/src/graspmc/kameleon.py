"""Kernel-adaptive Metropolis-Hastings (Kameleon) on the pose embedding.

Each step draws a subsample ``z`` of the chain history, proposes from
``N(x_t, gamma^2 I + nu^2 M H M^T)`` with ``M`` the kernel gradient matrix at
``x_t``, projects the draw back onto unit-quaternion poses and applies the
MH correction with the (asymmetric) proposal densities evaluated in ambient
coordinates.  Adaptation happens only during burn-in: once it ends the
subsample is frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from graspmc import kernel as _kernel
from graspmc.geometry import DegenerateProjectionError, Pose, align_sign, embed, project
from graspmc.kernel import KernelParams
from graspmc.targets import TargetDensity


@dataclass(frozen=True)
class KameleonParams:
    gamma: float = 1e-5
    nu: float = 2.38 / math.sqrt(6.0)
    n: int = 100
    burn_in: int = 100
    iterations: int = 1000
    kernel: KernelParams = field(default_factory=KernelParams)
    eta: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.nu > 0):
            raise ValueError("gamma and nu must be > 0")
        if self.n < 1 or self.burn_in < 0 or self.iterations < 0:
            raise ValueError("n must be >= 1, burn_in and iterations >= 0")


class History:
    """Append-only buffer of ambient pose vectors."""

    def __init__(self, initial, capacity: int = 0):
        rows = np.array([embed(p) if isinstance(p, Pose) else p for p in initial], dtype=float)
        rows = rows.reshape(-1, 7)
        self._buf = np.empty((max(len(rows) + capacity, 16), 7))
        self._buf[: len(rows)] = rows
        self._len = len(rows)

    def append(self, v: np.ndarray) -> None:
        if self._len == len(self._buf):
            self._buf = np.concatenate([self._buf, np.empty_like(self._buf)])
        self._buf[self._len] = v
        self._len += 1

    @property
    def array(self) -> np.ndarray:
        return self._buf[: self._len]

    def __len__(self):
        return self._len


@dataclass
class ChainState:
    """Mutable sampler state shared by the Kameleon and darting moves."""

    current: Pose
    log_pi: float
    history: History
    burn_in: int = 0
    frozen_subsample: np.ndarray | None = None
    iteration: int = 0
    kameleon_proposed: int = 0
    kameleon_accepted: int = 0
    dart_attempts: int = 0
    dart_accepted: int = 0
    holds: int = 0
    last_accepted: bool = False
    last_branch: str = ""
    _cov_cache: tuple | None = field(default=None, repr=False)

    @classmethod
    def start(cls, target: TargetDensity, start: Pose, initial_history,
              burn_in: int, capacity: int = 0) -> ChainState:
        return cls(start, target.log_density(start), History(initial_history, capacity),
                   burn_in=burn_in)

    @property
    def in_burn_in(self) -> bool:
        return self.iteration < self.burn_in

    @property
    def acceptance_rate(self) -> float:
        return self.kameleon_accepted / self.kameleon_proposed if self.kameleon_proposed else 0.0

    def freeze(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.frozen_subsample is None:
            self.frozen_subsample = _draw_subsample(self.history.array, n, rng)
            self.frozen_subsample.flags.writeable = False
            self._cov_cache = None
        return self.frozen_subsample

    def advance(self, pose: Pose, log_pi: float, accepted: bool, branch: str) -> None:
        self.current = pose
        self.log_pi = log_pi
        self.history.append(embed(pose))
        self.iteration += 1
        self.last_accepted = accepted
        self.last_branch = branch


def _draw_subsample(hist: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if len(hist) == 0:
        raise ValueError("chain history is empty")
    if len(hist) <= n:
        return hist.copy()
    idx = rng.choice(len(hist), size=n, replace=False)
    return hist[idx]


def subsample_history(state: ChainState, n: int, rng: np.random.Generator) -> np.ndarray:
    """``(n, 7)`` uniform subsample without replacement.

    Fresh during burn-in; afterwards the frozen subsample (drawn on first use).
    """
    if state.frozen_subsample is not None:
        return state.frozen_subsample
    if state.in_burn_in:
        return _draw_subsample(state.history.array, n, rng)
    return state.freeze(n, rng)


def _covariance(x_vec, z, params: KameleonParams):
    return _kernel.proposal_covariance_at(x_vec, z, params.eta, params.kernel,
                                          params.gamma, params.nu)


def kameleon_propose(x: Pose, z: np.ndarray, params: KameleonParams,
                     rng: np.random.Generator, cov: np.ndarray | None = None):
    """Returns ``(proposal_pose, ambient_draw)``.

    Draws 7 standard normals.  Raises ``DegenerateProjectionError`` when the
    draw's quaternion part is (near) zero; the caller rejects.
    """
    xv = embed(x)
    if cov is None:
        cov = _covariance(xv, z, params)
    L = _kernel.backend.cholesky(cov)
    draw = xv + L @ rng.standard_normal(7)
    return project(draw), draw


def log_q(x_to: Pose, x_from: Pose, z: np.ndarray, params: KameleonParams,
          cov: np.ndarray | None = None) -> float:
    """Log proposal density of ``x_to`` given ``x_from`` in ambient coordinates."""
    fv = embed(x_from)
    tv = align_sign(embed(x_to), fv)
    if cov is None:
        cov = _covariance(fv, z, params)
    return _kernel.backend.mvn_logpdf(tv, fv, cov)


def kameleon_step(state: ChainState, target: TargetDensity, params: KameleonParams,
                  rng: np.random.Generator) -> ChainState:
    """One Kameleon MH step; ``state`` is updated in place and returned.

    Draw order: subsample indices (burn-in only, or the one-off freeze),
    7 normals for the proposal, one uniform for acceptance (always drawn).
    """
    z = subsample_history(state, params.n, rng)
    frozen = z is state.frozen_subsample
    x = state.current
    xv = embed(x)

    cov_x = None
    if frozen and state._cov_cache is not None and np.array_equal(state._cov_cache[0], xv):
        cov_x = state._cov_cache[1]
    if cov_x is None:
        cov_x = _covariance(xv, z, params)

    try:
        prop, _ = kameleon_propose(x, z, params, rng, cov=cov_x)
    except DegenerateProjectionError:
        prop = None
    u = rng.random()
    state.kameleon_proposed += 1

    accept = False
    lp_new = -math.inf
    cov_new = None
    if prop is not None:
        lp_new = target.log_density(prop)
        if lp_new > -math.inf:
            if state.log_pi == -math.inf:
                accept = True
            else:
                pv = embed(prop)
                cov_new = _covariance(pv, z, params)
                log_alpha = (lp_new - state.log_pi
                             + log_q(x, prop, z, params, cov=cov_new)
                             - log_q(prop, x, z, params, cov=cov_x))
                accept = log_alpha >= 0.0 or u < math.exp(log_alpha)

    if accept:
        state.kameleon_accepted += 1
        if frozen:
            state._cov_cache = (embed(prop), cov_new) if cov_new is not None else None
        state.advance(prop, lp_new, True, "kameleon")
    else:
        if frozen:
            state._cov_cache = (xv, cov_x)
        state.advance(x, state.log_pi, False, "kameleon")
    return state
