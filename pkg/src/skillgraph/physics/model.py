"""Planar articulated robot description.

Every link is a capsule whose long axis is its local ``z`` axis, centred on
the link's centre of mass. Rotations are about the world ``+y`` axis; a
positive angle turns ``+z`` toward ``+x``. Link 0 is the root and each other
link hangs off exactly one revolute joint whose parent appears earlier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Link:
    name: str
    length: float
    mass: float
    radius: float = 0.04
    inertia: float | None = None

    @property
    def moment(self) -> float:
        if self.inertia is not None:
            return self.inertia
        return self.mass * (self.length**2 + (2 * self.radius) ** 2) / 12.0


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int
    child: int
    parent_anchor: tuple[float, float]  # (x, z) from the parent's COM, parent frame
    child_anchor: tuple[float, float]  # (x, z) from the child's COM, child frame
    lower: float
    upper: float
    stall_torque: float
    damping: float = 0.5


@dataclass(frozen=True)
class ContactParams:
    stiffness: float = 5.0e4  # N/m
    damping: float = 250.0  # N s/m
    tangential_damping: float = 250.0  # N s/m, viscous regularisation of friction
    friction: float = 0.9
    limit_stiffness: float = 400.0  # N m/rad
    limit_damping: float = 4.0  # N m s/rad


@dataclass(frozen=True)
class RobotModel:
    links: tuple[Link, ...]
    joints: tuple[Joint, ...] = ()
    control_dt: float = 1.0 / 60.0
    substeps: int = 8
    gravity: float = 9.81
    contact: ContactParams = field(default_factory=ContactParams)
    has_ground: bool = True

    def __post_init__(self):
        if self.control_dt <= 0 or self.substeps < 1:
            raise ValueError("control_dt must be positive and substeps >= 1")
        for link in self.links:
            if link.mass <= 0 or link.moment <= 0 or link.length < 0:
                raise ValueError(f"link {link.name!r} needs positive mass and inertia")
        if len(self.joints) != len(self.links) - 1:
            raise ValueError("a tree of n links needs n - 1 joints")
        children = sorted(j.child for j in self.joints)
        if children != list(range(1, len(self.links))):
            raise ValueError("every non-root link must be the child of exactly one joint")
        for j in self.joints:
            if not 0 <= j.parent < j.child:
                raise ValueError(f"joint {j.name!r}: parent must precede child")
            if not j.lower < j.upper:
                raise ValueError(f"joint {j.name!r}: limits must be ordered")

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_dof(self) -> int:
        return 3 + self.n_joints

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    @property
    def stall_torques(self) -> np.ndarray:
        return np.array([j.stall_torque for j in self.joints], dtype=np.float64)

    @property
    def joint_lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints], dtype=np.float64)

    @property
    def joint_upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints], dtype=np.float64)

    def arrays(self) -> dict[str, np.ndarray]:
        """Flat arrays consumed by the compiled simulation kernels."""
        nl = self.n_links
        joint_of = np.full(nl, -1, dtype=np.int64)
        for k, j in enumerate(self.joints):
            joint_of[j.child] = k
        parent = np.full(nl, -1, dtype=np.int64)
        pa = np.zeros((nl, 2))
        ca = np.zeros((nl, 2))
        for j in self.joints:
            parent[j.child] = j.parent
            pa[j.child] = j.parent_anchor
            ca[j.child] = j.child_anchor
        c = self.contact
        return {
            "mass": np.array([link.mass for link in self.links]),
            "inertia": np.array([link.moment for link in self.links]),
            "half_length": np.array([0.5 * link.length for link in self.links]),
            "radius": np.array([link.radius for link in self.links]),
            "parent": parent,
            "joint_of": joint_of,
            "parent_anchor": pa,
            "child_anchor": ca,
            "lower": self.joint_lower,
            "upper": self.joint_upper,
            "damping": np.array([j.damping for j in self.joints], dtype=np.float64),
            "params": np.array([
                self.gravity, c.stiffness, c.damping, c.tangential_damping, c.friction,
                c.limit_stiffness, c.limit_damping, 1.0 if self.has_ground else 0.0,
            ]),
        }


def five_link() -> RobotModel:
    """Torso plus two thigh/shin legs; about 13 kg and 1 m tall."""
    links = (
        Link("torso", 0.5, 6.0),
        Link("thigh_l", 0.3, 2.0),
        Link("shin_l", 0.3, 1.5),
        Link("thigh_r", 0.3, 2.0),
        Link("shin_r", 0.3, 1.5),
    )
    # Hip flexion (leg forward, toward +x) is negative; knee flexion is positive.
    joints = (
        Joint("hip_l", 0, 1, (0.0, -0.25), (0.0, 0.15), -2.4, 0.6, 40.0),
        Joint("knee_l", 1, 2, (0.0, -0.15), (0.0, 0.15), 0.0, 2.5, 40.0),
        Joint("hip_r", 0, 3, (0.0, -0.25), (0.0, 0.15), -2.4, 0.6, 40.0),
        Joint("knee_r", 3, 4, (0.0, -0.15), (0.0, 0.15), 0.0, 2.5, 40.0),
    )
    return RobotModel(links, joints)


def single_link(length: float = 0.5, mass: float = 1.0, **kw) -> RobotModel:
    return RobotModel((Link("body", length, mass),), (), **kw)
