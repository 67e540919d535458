import math

import numpy as np
import pytest

from morphforge.errors import ZeroVector
from morphforge.geometry import Capsule, Pose, Rotation, Sphere, signed_distance
from morphforge.kinematics import (
    DesignMode,
    DesignParams,
    build_robot,
    default_catalog,
    forward_kinematics,
)
from morphforge.objective import (
    LossWeights,
    RAD2DEG,
    benchmark_loss,
    collision_cost,
    collision_pair_loss,
    design_diversity,
    hardware_cost,
    ik_diversity,
    normalized_score,
    pose_distance,
    pose_errors,
    solved_check,
    total_loss,
)
from morphforge.scene import Goal, Obstacle, Scene, ToleranceMode

from oracles import pair_loss_oracle, point_segment_distance

W = LossWeights()


def goal_at(pose, tol=ToleranceMode.FULL_POSE, gid="g"):
    return Goal(gid, pose, tol)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return Rotation(
        np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
    )


class TestPoseDistance:
    def test_equal_pose_unclipped_zero(self):
        p = Pose(np.array([0.1, 0.2, 0.3]), Rotation.about_y(0.4))
        assert pose_distance(goal_at(p), p, W, clipped=False) == 0.0

    def test_rot_symmetric_z_invariance(self):
        rng = np.random.default_rng(0)
        p = Pose(np.array([0.1, 0.2, 0.3]), random_rotation(rng))
        for _ in range(100):
            phi = rng.uniform(-math.pi, math.pi)
            rotated = Pose(p.position, Rotation(p.rotation.matrix @ Rotation.about_z(phi).matrix))
            g = goal_at(p, ToleranceMode.ROT_SYMMETRIC)
            assert pose_distance(g, rotated, W) == pytest.approx(0.0, abs=1e-12)

    def test_rot_symmetric_flip(self):
        p = Pose(np.zeros(3), Rotation.identity())
        flipped = Pose(np.zeros(3), Rotation.about_x(math.pi))
        g = goal_at(p, ToleranceMode.ROT_SYMMETRIC)
        assert pose_distance(g, flipped, W) == pytest.approx(W.w_r_rot * 1.0)

    def test_position_only(self):
        p = Pose(np.zeros(3), Rotation.identity())
        moved = Pose(np.array([0.3, 0, 0]), Rotation.about_x(1.0))
        g = goal_at(p, ToleranceMode.POSITION_ONLY)
        assert pose_distance(g, moved, W) == pytest.approx(0.3)

    def test_clipped_zero_iff_within_floor(self):
        p = Pose(np.zeros(3), Rotation.identity())
        almost = Pose(np.zeros(3), Rotation.about_z(math.radians(0.1)))
        beyond = Pose(np.zeros(3), Rotation.about_z(math.radians(0.5)))
        g = goal_at(p)
        assert pose_distance(g, almost, W, clipped=True) == pytest.approx(0.0, abs=1e-12)
        assert pose_distance(g, beyond, W, clipped=True) > 0.0
        # unclipped variant is zero only at identical poses
        assert pose_distance(g, almost, W, clipped=False) > 0.0


class TestCollisionPairLoss:
    def test_boundary(self):
        assert collision_pair_loss(0.12, 0.12) == 0.0

    def test_contact(self):
        assert collision_pair_loss(0.0, 0.12) == pytest.approx(1.0, abs=1e-15)

    def test_above_threshold(self):
        assert collision_pair_loss(0.24, 0.12) == 0.0

    def test_continuity_at_threshold(self):
        eps = 1e-9
        assert abs(collision_pair_loss(0.12 - eps, 0.12)) < 1e-8

    def test_monotone(self):
        rng = np.random.default_rng(1)
        sds = np.sort(rng.uniform(-0.5, 0.5, 10000))
        vals = [collision_pair_loss(sd, 0.12) for sd in sds]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_matches_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            sd, t = rng.uniform(-0.3, 0.5), rng.uniform(0.01, 0.3)
            assert collision_pair_loss(sd, t) == pytest.approx(pair_loss_oracle(sd, t), abs=1e-15)


class TestCollisionCost:
    def test_single_body_no_pairs(self):
        params = DesignParams(DesignMode.FREE, rows=np.array([[0.3, 0.0, 0.0]]))
        robot = build_robot(params)
        _, ee = forward_kinematics(robot, [0.0])
        scene = Scene([goal_at(ee)])
        assert collision_cost(scene, robot, np.array([0.0]), W) == 0.0

    def test_touching_sphere_is_exactly_one(self):
        params = DesignParams(DesignMode.FREE, rows=np.array([[0.3, 0.0, 0.0]]))
        robot = build_robot(params)
        # link axis (0,0,0)-(0,0,0.3) radius 0.06; sphere distance exactly t away:
        # place center so sd = 0 (touching): distance from axis = 0.06 + r
        sphere = Obstacle("o", Sphere([0.06 + 0.1, 0.0, 0.15], 0.1))
        goal = goal_at(Pose(np.array([0.0, 0.0, 0.5]), Rotation.identity()))
        scene = Scene([goal], [sphere])
        assert collision_cost(scene, robot, np.array([0.0]), W) == pytest.approx(1.0, abs=1e-12)

    def test_against_double_loop_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            rows = np.column_stack(
                [rng.uniform(0.05, 0.4, n), rng.uniform(-0.4, 0.4, n), rng.uniform(-3, 3, n)]
            )
            rows[:, 1][np.abs(rows[:, 1]) < 0.02] = 0.1
            params = DesignParams(DesignMode.FREE, rows=rows)
            robot = build_robot(params)
            q = rng.uniform(-math.pi, math.pi, n)
            frames, ee = forward_kinematics(robot, q)
            obstacles = [
                Obstacle(f"o{i}", Sphere(rng.uniform(-0.8, 0.8, 3), rng.uniform(0.05, 0.15)))
                for i in range(3)
            ]
            goal_pos = rng.uniform(0.8, 1.2, 3)  # outside the obstacles
            scene = Scene([goal_at(Pose(goal_pos, Rotation.identity()))], obstacles)

            got = collision_cost(scene, robot, q, W)

            # oracle: recompute every pair with scalar primitives
            import torch
            from morphforge.kinematics import fk_frames_t, robot_tensors
            from morphforge.geometry import DT

            t = robot_tensors(robot)
            with torch.no_grad():
                _, body_frames, _ = fk_frames_t(
                    torch.as_tensor(q, dtype=DT), t["prox"], rows=t["rows"]
                )
            world = []
            for spec in robot.capsule_specs:
                m = body_frames[spec.body].numpy()
                a = m[:3, :3] @ spec.a_local + m[:3, 3]
                b = m[:3, :3] @ spec.b_local + m[:3, 3]
                world.append((a, b, spec.radius))
            want = 0.0
            for i, j in robot.collision_pairs:
                ai, bi, ri = world[i]
                aj, bj, rj = world[j]
                sd = signed_distance(Capsule(ai, bi, ri), Capsule(aj, bj, rj))
                want += pair_loss_oracle(sd, W.collision_threshold)
            for a, b, r in world:
                for o in obstacles:
                    sd = point_segment_distance(o.shape.center, a, b) - r - o.shape.radius
                    want += pair_loss_oracle(sd, W.collision_threshold)
            assert got == pytest.approx(want, abs=1e-12)


class TestHardwareCost:
    def test_examples(self):
        p = DesignParams(DesignMode.FREE, rows=np.array([[0.3, 0.2, 0.0], [0.1, 0.0, 0.0]]))
        assert hardware_cost(p) == pytest.approx(0.6)
        p0 = DesignParams(DesignMode.FREE, rows=np.zeros((2, 3)))
        assert hardware_cost(p0) == 0.0
        pn = DesignParams(DesignMode.FREE, rows=np.array([[0.1, -0.2, 0.0]]))
        assert hardware_cost(pn) == pytest.approx(0.3)

    def test_modular(self):
        cat = default_catalog()
        p = DesignParams(DesignMode.MODULAR, slots=(0, 2, 4))
        assert hardware_cost(p, cat) == pytest.approx(0.1 + 0.4 + 0.4)

    def test_monotone(self):
        rng = np.random.default_rng(4)
        rows = np.column_stack([rng.uniform(0, 0.4, 4), rng.uniform(-0.4, 0.4, 4), np.zeros(4)])
        base = hardware_cost(DesignParams(DesignMode.FREE, rows=rows))
        for i in range(4):
            for j, delta in ((0, 0.01), (1, 0.01 if rows[i, 1] >= 0 else -0.01)):
                bumped = rows.copy()
                bumped[i, j] += delta
                assert hardware_cost(DesignParams(DesignMode.FREE, rows=bumped)) >= base


class TestDiversity:
    def test_identical_designs(self):
        p = DesignParams(DesignMode.FREE, rows=np.full((2, 3), 0.1))
        assert design_diversity([[p, p]], W) == 0.0

    def test_l1_by_hand(self):
        n = 2
        a = DesignParams(DesignMode.FREE, rows=np.zeros((n, 3)))
        b = DesignParams(DesignMode.FREE, rows=np.ones((n, 3)))
        val = design_diversity([[a, b]], W)
        assert val == pytest.approx(-W.w_same_env * 3 * n)

    def test_single_design_per_env(self):
        p = DesignParams(DesignMode.FREE, rows=np.full((2, 3), 0.1))
        assert design_diversity([[p]], W) == 0.0

    def test_cross_env_term(self):
        a = DesignParams(DesignMode.FREE, rows=np.zeros((1, 3)))
        b = DesignParams(DesignMode.FREE, rows=np.ones((1, 3)))
        # b=2 envs, r=1: only the cross term fires: 2*w_e/(2*1*1) * 3 = w_e*3
        val = design_diversity([[a], [b]], W)
        assert val == pytest.approx(-W.w_cross_env * 3)

    def test_literal_sign_flag(self):
        w2 = LossWeights(literal_similarity_sign=True)
        a = DesignParams(DesignMode.FREE, rows=np.zeros((1, 3)))
        b = DesignParams(DesignMode.FREE, rows=np.ones((1, 3)))
        assert design_diversity([[a, b]], w2) > 0.0

    def test_modular_one_hot(self):
        a = DesignParams(DesignMode.MODULAR, slots=(0, 0))
        b = DesignParams(DesignMode.MODULAR, slots=(1, 0))
        val = design_diversity([[a, b]], W, n_choices=5)
        assert val == pytest.approx(-W.w_same_env * 2.0)

    def test_ik_diversity_identical(self):
        q = np.array([0.1, 0.2, 0.3])
        assert ik_diversity([[q, q]], W) == pytest.approx(W.w_ik_div * 1.0)

    def test_ik_diversity_orthogonal(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert ik_diversity([[a, b]], W) == pytest.approx(0.0, abs=1e-15)

    def test_ik_diversity_antipodal(self):
        q = np.array([0.5, -0.4])
        assert ik_diversity([[q, -q]], W) == pytest.approx(-W.w_ik_div)

    def test_ik_diversity_zero_vector(self):
        with pytest.raises(ZeroVector):
            ik_diversity([[np.zeros(3), np.ones(3)]], W)

    def test_ik_diversity_single_candidate(self):
        assert ik_diversity([[np.ones(3)]], W) == 0.0


class TestTotalLoss:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.rows = np.column_stack(
            [rng.uniform(0.05, 0.4, 3), rng.uniform(0.1, 0.4, 3), rng.uniform(-2, 2, 3)]
        )
        self.params = DesignParams(DesignMode.FREE, rows=self.rows)
        self.robot = build_robot(self.params)
        self.q = rng.uniform(-math.pi, math.pi, (3, 2))

    def test_exact_goals_zero_cost_params(self):
        params = DesignParams(DesignMode.FREE, rows=np.zeros((2, 3)))
        robot = build_robot(params)
        q = np.array([[0.3, -0.5], [1.0, 0.2]])
        goals = []
        for g in range(2):
            _, ee = forward_kinematics(robot, q[:, g])
            goals.append(goal_at(ee, gid=f"g{g}"))
        bd = total_loss(Scene(goals), params, q, W)
        assert bd.total == pytest.approx(0.0, abs=1e-9)

    def test_position_perturbation_linearity(self):
        params = DesignParams(DesignMode.FREE, rows=np.zeros((2, 3)))
        robot = build_robot(params)
        q = np.array([[0.3], [1.0]])
        _, ee = forward_kinematics(robot, q[:, 0])
        delta = 0.07
        goal = goal_at(Pose(ee.position + np.array([delta, 0, 0]), ee.rotation))
        bd = total_loss(Scene([goal]), params, q, W)
        assert bd.total == pytest.approx(W.w_d * delta, abs=1e-9)

    def test_termwise_oracle(self):
        goals = []
        rng = np.random.default_rng(6)
        for g in range(2):
            _, ee = forward_kinematics(self.robot, rng.uniform(-1, 1, 3))
            goals.append(goal_at(ee, gid=f"g{g}"))
        obstacles = [Obstacle("o", Sphere([2.0, 2.0, 2.0], 0.1))]
        scene = Scene(goals, obstacles)
        bd = total_loss(scene, self.params, self.q, W)
        dist = sum(
            pose_distance(goals[g], forward_kinematics(self.robot, self.q[:, g])[1], W, clipped=True)
            for g in range(2)
        )
        col = sum(collision_cost(scene, self.robot, self.q[:, g], W) for g in range(2))
        hw = hardware_cost(self.params)
        assert bd.distance == pytest.approx(dist, abs=1e-12)
        assert bd.collision == pytest.approx(col, abs=1e-12)
        assert bd.hardware == pytest.approx(hw, abs=1e-12)
        want_total = W.w_d * dist + W.w_col * col + W.w_hw * hw
        assert bd.total == pytest.approx(want_total, abs=1e-12)

    def test_nonnegative_without_regularization(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            q = rng.uniform(-math.pi, math.pi, (3, 2))
            goals = [
                goal_at(Pose(rng.uniform(-1, 1, 3), random_rotation(rng)), gid=f"g{g}")
                for g in range(2)
            ]
            bd = total_loss(Scene(goals), self.params, q, W)
            assert bd.total >= 0.0

    def test_benchmark_loss_flag(self):
        goals = [goal_at(Pose(np.array([0.5, 0, 0.2]), Rotation.identity()))]
        bd = total_loss(Scene(goals), self.params, self.q[:, :1], W)
        with_hw = benchmark_loss(bd, W)
        without = benchmark_loss(bd, LossWeights(include_hardware_in_benchmark=False))
        assert with_hw == pytest.approx(without + W.w_hw * bd.hardware)


class TestSolvedAndScore:
    def test_solved_thresholds(self):
        p = Pose(np.zeros(3), Rotation.identity())
        near = Pose(np.array([5e-4, 0, 0]), Rotation.about_z(math.radians(0.5)))
        far_pos = Pose(np.array([2e-3, 0, 0]), Rotation.identity())
        far_rot = Pose(np.zeros(3), Rotation.about_z(math.radians(2.0)))
        assert solved_check(goal_at(p), near)
        assert not solved_check(goal_at(p), far_pos)
        assert not solved_check(goal_at(p), far_rot)
        assert solved_check(goal_at(p, ToleranceMode.POSITION_ONLY), far_rot)

    def test_rot_symmetric_projected(self):
        p = Pose(np.zeros(3), Rotation.identity())
        spun = Pose(np.zeros(3), Rotation.about_z(2.0))
        assert solved_check(goal_at(p, ToleranceMode.ROT_SYMMETRIC), spun)
        tipped = Pose(np.zeros(3), Rotation.about_x(math.radians(2.0)))
        assert not solved_check(goal_at(p, ToleranceMode.ROT_SYMMETRIC), tipped)
        _, rot_err = pose_errors(goal_at(p, ToleranceMode.ROT_SYMMETRIC), tipped)
        assert rot_err == pytest.approx(math.radians(2.0), abs=1e-9)

    def test_normalized_score(self):
        assert normalized_score(1.0, 1.0, 3.0) == 1.0
        assert normalized_score(3.0, 1.0, 3.0) == 0.0
        assert normalized_score(2.0, 1.0, 3.0) == 0.5
        assert normalized_score(5.0, 1.0, 3.0) == 0.0
        assert normalized_score(0.0, 1.0, 3.0) == 1.0
        assert normalized_score(2.0, 2.0, 2.0) == 1.0
