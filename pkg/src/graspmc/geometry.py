"""Rigid-body pose algebra on unit dual quaternions.

A pose is stored as a (unit quaternion, translation) pair, which is the same
algebra as the 8-component dual quaternion ``q_rot + eps * q_tra`` without the
redundant constraints on the dual part.  Quaternions are numpy arrays ordered
``(w, x, y, z)``.

The 7-dimensional *ambient* embedding ``[qw, qx, qy, qz, tx, ty, tz]`` is the
vector space in which Gaussian proposals, kernel gradients and darting maps
are expressed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

UNIT_TOL = 1e-9
DEGENERATE_NORM = 1e-9

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


class DegenerateProjectionError(ValueError):
    """Raised when an ambient vector has a (near) zero quaternion part."""


# -- quaternion helpers -------------------------------------------------------


def quat(w: float, x: float, y: float, z: float) -> np.ndarray:
    """General (not necessarily unit) quaternion."""
    return np.array([w, x, y, z], dtype=float)


def unit_quat(w: float, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> np.ndarray:
    q = quat(w, x, y, z)
    n = np.linalg.norm(q)
    if n <= DEGENERATE_NORM:
        raise DegenerateProjectionError("cannot normalise a zero quaternion")
    return q / n


def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a * b``."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def qconj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def qrotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate the 3-vector ``v`` by the unit quaternion ``q``."""
    w = q[0]
    u = q[1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def axis_angle(axis, angle: float) -> np.ndarray:
    """Unit quaternion for a rotation of ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Pick the representative of ``{q, -q}`` with ``w >= 0``.

    On the measure-zero set ``w == 0`` the first nonzero component is made
    nonnegative.
    """
    for comp in q:
        if comp > 0.0:
            return q
        if comp < 0.0:
            return -q
    return q


# -- poses --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: unit rotation quaternion plus translation (meters)."""

    rot: np.ndarray
    tra: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rot, dtype=float).reshape(4)
        tra = np.array(self.tra, dtype=float).reshape(3)
        n = math.sqrt(float(rot @ rot))
        if not n > DEGENERATE_NORM:
            raise DegenerateProjectionError("pose rotation has zero norm")
        rot /= n
        rot.flags.writeable = False
        tra.flags.writeable = False
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "tra", tra)

    @classmethod
    def identity(cls) -> Pose:
        return cls(IDENTITY_QUAT, np.zeros(3))

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> Pose:
        return cls(IDENTITY_QUAT, np.array([x, y, z], dtype=float))

    def canonical(self) -> Pose:
        return Pose(canonicalize(self.rot), self.tra)

    def same_as(self, other: Pose, tol: float = 1e-9) -> bool:
        """Equality as rigid transforms (rotation compared modulo sign)."""
        dot = float(self.rot @ other.rot)
        return (abs(abs(dot) - 1.0) <= tol
                and bool(np.all(np.abs(self.tra - other.tra) <= tol)))

    def __repr__(self) -> str:
        r = ", ".join(f"{v:.6g}" for v in self.rot)
        t = ", ".join(f"{v:.6g}" for v in self.tra)
        return f"Pose(rot=[{r}], tra=[{t}])"


class TransformDelta(NamedTuple):
    """Relative transform ``conj(a) * b`` split into canonical rotation (w >= 0)
    and translation."""

    rot: np.ndarray
    tra: np.ndarray


def pose_compose(a: Pose, b: Pose) -> Pose:
    """``b`` applied in the frame of ``a``."""
    return Pose(qmul(a.rot, b.rot), a.tra + qrotate(a.rot, b.tra))


def pose_conjugate(a: Pose) -> Pose:
    """Inverse rigid transform (the dual quaternion conjugate of a unit pose)."""
    rc = qconj(a.rot)
    return Pose(rc, -qrotate(rc, a.tra))


def relative_transform(a: Pose, b: Pose) -> TransformDelta:
    rc = qconj(a.rot)
    rot = qmul(rc, b.rot)
    rot = canonicalize(rot / np.linalg.norm(rot))
    return TransformDelta(rot, qrotate(rc, b.tra - a.tra))


def d_arc(q: np.ndarray, r: np.ndarray) -> float:
    """Arc between two unit quaternions, minimised over the sign of ``r``.

    ``acos|<q, r>|`` evaluated as ``2 atan2(|q - r|, |q + r|)`` (with ``r``
    sign-aligned), which stays accurate near zero.
    """
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.dot(q, r) < 0:
        r = -r
    return 2.0 * math.atan2(float(np.linalg.norm(q - r)), float(np.linalg.norm(q + r)))


def _check_c(c: float) -> None:
    if c < 0:
        raise ValueError(f"translation weight c must be >= 0, got {c}")


def d_mag(a: Pose, b: Pose, c: float) -> float:
    """Transformation magnitude using the rotational arc."""
    _check_c(c)
    v = relative_transform(a, b)
    arc = d_arc(IDENTITY_QUAT, v.rot)
    return math.sqrt(arc * arc + c * float(v.tra @ v.tra))


def d_mag_linearized(a: Pose, b: Pose, c: float) -> float:
    """Transformation magnitude with the arc replaced by the chord
    ``||q0 - v_rot||`` (``v_rot`` canonical)."""
    _check_c(c)
    v = relative_transform(a, b)
    diff = IDENTITY_QUAT - v.rot
    return math.sqrt(float(diff @ diff) + c * float(v.tra @ v.tra))


def d_mag_linearized_sq_batch(x: np.ndarray, ys: np.ndarray, c: float) -> np.ndarray:
    """Squared linearized distance from ambient ``x`` to every row of ``ys``.

    Uses the closed form ``2 - 2|<q_x, q_y>| + c ||t_y - t_x||^2``, which equals
    the relative-transform definition for unit quaternions (rotation preserves
    the translation norm and the canonical ``w`` of ``conj(q_x) q_y`` is
    ``|<q_x, q_y>|``).
    """
    ys = np.atleast_2d(ys)
    dots = np.abs(ys[:, :4] @ x[:4])
    dt = ys[:, 4:] - x[4:]
    return np.maximum(0.0, 2.0 - 2.0 * np.minimum(dots, 1.0)) + c * np.einsum("ij,ij->i", dt, dt)


# -- ambient embedding --------------------------------------------------------


def embed(p: Pose) -> np.ndarray:
    return np.concatenate([p.rot, p.tra])


def project(v) -> Pose:
    v = np.asarray(v, dtype=float)
    n = math.sqrt(float(v[:4] @ v[:4]))
    if not n > DEGENERATE_NORM:
        raise DegenerateProjectionError(f"quaternion norm {n:.3g} too small to project")
    return Pose(v[:4], v[4:7])


def align_sign(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Return ambient ``v`` with its quaternion sign chosen nearest to ``ref``."""
    if float(v[:4] @ ref[:4]) < 0.0:
        v = v.copy()
        v[:4] = -v[:4]
    return v


def align_rows(vs: np.ndarray, ref: np.ndarray) -> np.ndarray:
    vs = np.array(vs, dtype=float, copy=True)
    flip = vs[:, :4] @ ref[:4] < 0.0
    vs[flip, :4] *= -1.0
    return vs


def random_pose(rng: np.random.Generator, scale: float = 1.0) -> Pose:
    """Uniform rotation, Gaussian translation with std ``scale``."""
    q = rng.standard_normal(4)
    return Pose(q, scale * rng.standard_normal(3))
