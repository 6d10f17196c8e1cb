"""Robot-root-relative (ego-centric) state representation.

Quaternions are scalar-first ``(w, x, y, z)`` and all helpers broadcast over
leading batch dimensions. Body index 0 of a :class:`RobotState` is the root.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

QUAT_TOL = 1e-9


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors ``v`` by unit quaternions ``q``."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Pick the representative with a non-negative scalar part."""
    q = np.asarray(q, dtype=float)
    return np.where(q[..., :1] < 0, -q, q)


def quat_from_pitch(angle) -> np.ndarray:
    """Rotation about +y by ``angle``; maps +z toward +x for positive angles."""
    half = 0.5 * np.asarray(angle, dtype=float)
    zero = np.zeros_like(half)
    return np.stack([np.cos(half), zero, np.sin(half), zero], axis=-1)


@dataclass(frozen=True)
class RigidBodyState:
    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray


@dataclass(frozen=True)
class RobotState:
    """Rigid-body and joint state of one robot (or a batch of robots).

    ``positions`` etc. have shape ``(..., n_bodies, k)`` with body 0 the root.
    ``contact_forces`` are per-body forces in each body's local frame and
    ``local_sensors`` holds root-frame inertial readings; both are local
    measurements and pass through frame changes untouched.
    """

    positions: np.ndarray
    orientations: np.ndarray
    linear_velocities: np.ndarray
    angular_velocities: np.ndarray
    joint_positions: np.ndarray
    joint_velocities: np.ndarray
    contact_forces: np.ndarray
    local_sensors: np.ndarray

    @property
    def n_bodies(self) -> int:
        return self.positions.shape[-2]

    def body(self, k: int) -> RigidBodyState:
        return RigidBodyState(
            self.positions[..., k, :],
            self.orientations[..., k, :],
            self.linear_velocities[..., k, :],
            self.angular_velocities[..., k, :],
        )

    @property
    def root(self) -> RigidBodyState:
        return self.body(0)

    @property
    def bodies(self) -> list[RigidBodyState]:
        return [self.body(k) for k in range(1, self.n_bodies)]


def to_ego(robot: RobotState) -> RobotState:
    """Express every body pose and velocity in the root body's frame."""
    q_root = robot.orientations[..., :1, :]
    norm = np.linalg.norm(q_root, axis=-1)
    if np.any(np.abs(norm - 1.0) > QUAT_TOL):
        raise ValueError(f"root quaternion is not unit (norm {norm.ravel()[0]!r})")
    inv = quat_conj(q_root)

    pos = quat_rotate(inv, robot.positions - robot.positions[..., :1, :])
    rot = quat_canonical(quat_mul(inv, robot.orientations))
    lin = quat_rotate(inv, robot.linear_velocities - robot.linear_velocities[..., :1, :])
    ang = quat_rotate(inv, robot.angular_velocities - robot.angular_velocities[..., :1, :])

    # exact values for the root rather than round-off residue
    pos[..., 0, :] = 0.0
    rot[..., 0, :] = (1.0, 0.0, 0.0, 0.0)
    lin[..., 0, :] = 0.0
    ang[..., 0, :] = 0.0
    return replace(
        robot, positions=pos, orientations=rot, linear_velocities=lin, angular_velocities=ang
    )


@dataclass(frozen=True)
class ObservationLayout:
    """Slot table of the flat observation vector (layout version 1)."""

    n_bodies: int
    n_joints: int
    n_sensors: int
    cpg_size: int
    version: int = 1

    def slots(self) -> list[tuple[str, int, int]]:
        sizes = [
            ("body_positions", 3 * self.n_bodies),
            ("body_orientations", 4 * self.n_bodies),
            ("body_linear_velocities", 3 * self.n_bodies),
            ("body_angular_velocities", 3 * self.n_bodies),
            ("joint_positions", self.n_joints),
            ("joint_velocities", self.n_joints),
            ("contact_forces", 3 * self.n_bodies),
            ("local_sensors", self.n_sensors),
            ("cpg", self.cpg_size),
            ("clamp", 1),
            ("phase", 1),
        ]
        out, start = [], 0
        for name, n in sizes:
            out.append((name, start, start + n))
            start += n
        return out

    def slice(self, name: str) -> slice:
        for slot, a, b in self.slots():
            if slot == name:
                return slice(a, b)
        raise KeyError(name)

    @property
    def size(self) -> int:
        return self.slots()[-1][2]


def layout_for(robot: RobotState, cpg_size: int) -> ObservationLayout:
    return ObservationLayout(
        robot.n_bodies, robot.joint_positions.shape[-1], robot.local_sensors.shape[-1], cpg_size
    )


def assemble_observation(
    ego: RobotState, cpg_block, clamp_coeff, phase, layout: ObservationLayout | None = None
) -> np.ndarray:
    """Flatten a robot state plus the CPG block, clamp coefficient and episode phase.

    The fields are concatenated in :meth:`ObservationLayout.slots` order;
    body-wise blocks are flattened body-major.
    """
    cpg_block = np.asarray(cpg_block, dtype=np.float64)
    expected = layout or layout_for(ego, cpg_block.shape[-1])
    actual = layout_for(ego, cpg_block.shape[-1])
    if (actual.n_bodies, actual.n_joints, actual.n_sensors, actual.cpg_size) != (
        expected.n_bodies, expected.n_joints, expected.n_sensors, expected.cpg_size
    ):
        raise ValueError(f"state does not match observation layout {expected}")
    batch = ego.positions.shape[:-2]

    def flat(x):
        return np.asarray(x, dtype=np.float64).reshape(batch + (-1,))

    def scalar(x):
        return np.broadcast_to(np.asarray(x, dtype=np.float64), batch)[..., None]

    parts = [
        flat(ego.positions),
        flat(quat_canonical(ego.orientations)),
        flat(ego.linear_velocities),
        flat(ego.angular_velocities),
        flat(ego.joint_positions),
        flat(ego.joint_velocities),
        flat(ego.contact_forces),
        flat(ego.local_sensors),
        np.broadcast_to(cpg_block, batch + cpg_block.shape[-1:]),
        scalar(clamp_coeff),
        scalar(phase),
    ]
    obs = np.concatenate(parts, axis=-1)
    if obs.shape[-1] != expected.size:
        raise ValueError(f"observation has {obs.shape[-1]} entries, layout needs {expected.size}")
    return obs
