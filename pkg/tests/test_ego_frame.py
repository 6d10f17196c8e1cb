import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from skillgraph.cpg import CpgConfig, cpg_block
from skillgraph.ego_frame import (
    ObservationLayout, RobotState, assemble_observation, layout_for, quat_canonical, quat_from_pitch,
    quat_mul, quat_rotate, to_ego,
)
from skillgraph.physics import PlanarEnv

N_BODIES, N_JOINTS, N_SENSORS = 5, 4, 9


def xyzw_to_wxyz(q):
    return np.concatenate([q[..., 3:], q[..., :3]], axis=-1)


def wxyz_to_xyzw(q):
    return np.concatenate([q[..., 1:], q[..., :1]], axis=-1)


def random_robot(rng, batch=()):
    shape = batch + (N_BODIES,)
    quats = xyzw_to_wxyz(Rotation.random(int(np.prod(shape)), random_state=rng).as_quat()).reshape(shape + (4,))
    return RobotState(
        positions=rng.normal(size=shape + (3,)),
        orientations=quats,
        linear_velocities=rng.normal(size=shape + (3,)),
        angular_velocities=rng.normal(size=shape + (3,)),
        joint_positions=rng.normal(size=batch + (N_JOINTS,)),
        joint_velocities=rng.normal(size=batch + (N_JOINTS,)),
        contact_forces=rng.normal(size=shape + (3,)),
        local_sensors=rng.normal(size=batch + (N_SENSORS,)),
    )


def moved(robot, rot: Rotation, shift, drift):
    """The same robot seen after a proper rigid motion and a constant velocity offset."""
    qr = xyzw_to_wxyz(rot.as_quat())
    return RobotState(
        positions=rot.apply(robot.positions.reshape(-1, 3)).reshape(robot.positions.shape) + shift,
        orientations=quat_mul(qr, robot.orientations),
        linear_velocities=rot.apply(robot.linear_velocities.reshape(-1, 3)).reshape(robot.positions.shape) + drift,
        angular_velocities=rot.apply(robot.angular_velocities.reshape(-1, 3)).reshape(robot.positions.shape),
        joint_positions=robot.joint_positions,
        joint_velocities=robot.joint_velocities,
        contact_forces=robot.contact_forces,
        local_sensors=robot.local_sensors,
    )


def obs(robot):
    return assemble_observation(to_ego(robot), np.zeros(16), 0.5, 0.25)


def test_matches_scipy_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        robot = random_robot(rng)
        ego = to_ego(robot)
        root = Rotation.from_quat(wxyz_to_xyzw(robot.orientations[0]))
        inv = root.inv()
        want_pos = inv.apply(robot.positions - robot.positions[0])
        want_rot = xyzw_to_wxyz((inv * Rotation.from_quat(wxyz_to_xyzw(robot.orientations))).as_quat())
        want_rot = np.where(want_rot[:, :1] < 0, -want_rot, want_rot)
        want_lin = inv.apply(robot.linear_velocities - robot.linear_velocities[0])
        want_ang = inv.apply(robot.angular_velocities - robot.angular_velocities[0])
        assert np.allclose(ego.positions, want_pos, atol=1e-12)
        assert np.allclose(ego.orientations, want_rot, atol=1e-12)
        assert np.allclose(ego.linear_velocities, want_lin, atol=1e-12)
        assert np.allclose(ego.angular_velocities, want_ang, atol=1e-12)


def test_rigid_motion_invariance_1000():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        robot = random_robot(rng)
        rot = Rotation.random(random_state=rng)
        other = moved(robot, rot, rng.normal(scale=10, size=3), rng.normal(size=3))
        a, b = obs(robot), obs(other)
        worst = max(worst, np.abs(a - b).max())
        ego = to_ego(other)
        assert np.array_equal(ego.positions[0], np.zeros(3))
        assert np.array_equal(ego.orientations[0], [1.0, 0.0, 0.0, 0.0])
    assert worst <= 1e-9


def test_batched_equals_rowwise():
    rng = np.random.default_rng(2)
    robot = random_robot(rng, (7,))
    batched = to_ego(robot)
    for k in range(7):
        row = RobotState(*(getattr(robot, f)[k] for f in RobotState.__dataclass_fields__))
        assert np.allclose(to_ego(row).positions, batched.positions[k], atol=1e-15)


def test_local_measurements_pass_through():
    robot = random_robot(np.random.default_rng(3))
    ego = to_ego(robot)
    assert np.array_equal(ego.contact_forces, robot.contact_forces)
    assert np.array_equal(ego.local_sensors, robot.local_sensors)
    assert np.array_equal(ego.joint_positions, robot.joint_positions)


def test_non_unit_root_rejected():
    robot = random_robot(np.random.default_rng(4))
    q = robot.orientations.copy()
    q[0] *= 1.001
    with pytest.raises(ValueError, match="unit"):
        to_ego(RobotState(robot.positions, q, robot.linear_velocities, robot.angular_velocities,
                          robot.joint_positions, robot.joint_velocities, robot.contact_forces,
                          robot.local_sensors))


def test_quaternion_helpers():
    q = quat_from_pitch(np.pi / 2)
    assert np.allclose(quat_rotate(q, [0.0, 0.0, 1.0]), [1.0, 0.0, 0.0])
    assert np.allclose(quat_canonical(-q), q)
    assert quat_canonical(-q)[0] >= 0


def test_planar_env_layout():
    env = PlanarEnv()
    state = env.reset(0)
    robot = env.robot_state(state)
    layout = layout_for(robot, CpgConfig().size)
    assert layout.size == 115
    assert [name for name, _, _ in layout.slots()] == [
        "body_positions", "body_orientations", "body_linear_velocities", "body_angular_velocities",
        "joint_positions", "joint_velocities", "contact_forces", "local_sensors", "cpg", "clamp", "phase",
    ]
    o = assemble_observation(to_ego(robot), cpg_block(0.25, CpgConfig()), 0.3, 0.1, layout)
    assert o.shape == (1, 115)
    assert o[0, layout.slice("clamp")] == 0.3 and o[0, layout.slice("phase")] == 0.1
    assert np.array_equal(o[0, layout.slice("cpg")], cpg_block(0.25, CpgConfig()))


def test_layout_mismatch():
    robot = random_robot(np.random.default_rng(5))
    with pytest.raises(ValueError):
        assemble_observation(to_ego(robot), np.zeros(16), 0.0, 0.0, ObservationLayout(6, 4, 9, 16))


def test_planar_states_supine_and_prone_differ():
    # the root-frame gravity sensor is what separates lying on the back from the front
    env = PlanarEnv()
    q = np.zeros((2, env.model.n_dof))
    q[0, 2], q[1, 2] = -np.pi / 2, np.pi / 2
    robots = env.robot_state(env.make_state(env.place_on_ground(q)))
    a, b = (assemble_observation(to_ego(r), np.zeros(16), 0.0, 0.0) for r in (
        RobotState(*(getattr(robots, f)[k:k + 1] for f in RobotState.__dataclass_fields__)) for k in (0, 1)))
    assert not np.allclose(a, b)
