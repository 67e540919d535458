import itertools
import math

import numpy as np
import pytest
import torch

from morphforge.errors import BadSlot, ConstraintViolation, DegeneratePair
from morphforge.geometry import DT, Pose, Rotation
from morphforge.kinematics import (
    DesignMode,
    DesignParams,
    LINK_RADIUS,
    ModuleCatalog,
    assembly_count,
    build_robot,
    default_catalog,
    enumerate_assemblies,
    fk_frames_t,
    forward_kinematics,
    geometric_jacobian,
    joint_angles_from_xy,
    total_reach,
    validate_params,
    wrap_angles,
)

from oracles import fk_oracle, fk_oracle_frames


def free_params(rows):
    return DesignParams(DesignMode.FREE, rows=np.asarray(rows, dtype=float))


def random_free_rows(rng, n):
    return np.column_stack(
        [
            rng.uniform(0.0, 0.4, n),
            rng.uniform(-0.4, 0.4, n),
            rng.uniform(-math.pi, math.pi, n),
        ]
    )


class TestBuildRobot:
    def test_two_capsules(self):
        robot = build_robot(free_params([[0.3, 0.2, 0.0]]))
        assert robot.shape_count == 2
        spec_d, spec_a = robot.capsule_specs
        np.testing.assert_allclose(spec_d.a_local, [0, 0, 0])
        np.testing.assert_allclose(spec_d.b_local, [0, 0, 0.3])
        np.testing.assert_allclose(spec_a.a_local, [0, 0, 0.3])
        np.testing.assert_allclose(spec_a.b_local, [0.2, 0, 0.3])
        assert spec_d.radius == LINK_RADIUS

    def test_spherical_body(self):
        robot = build_robot(free_params([[0.0, 0.0, 1.0]]))
        assert robot.shape_count == 1
        spec = robot.capsule_specs[0]
        np.testing.assert_allclose(spec.a_local, spec.b_local)

    def test_collision_pairs_three_bodies(self):
        robot = build_robot(free_params([[0.1, 0.0, 0.0]] * 3))
        bodies = {(robot.capsule_specs[i].body, robot.capsule_specs[j].body) for i, j in robot.collision_pairs}
        assert (0, 1) not in bodies and (1, 2) not in bodies
        assert (0, 2) in bodies

    def test_pair_count_combinatorial(self):
        for n in range(2, 9):
            robot = build_robot(free_params([[0.2, 0.1, 0.3]] * n))
            shapes = robot.shape_count
            total = shapes * (shapes - 1) // 2
            same_or_adjacent = 0
            for i in range(shapes):
                for j in range(i + 1, shapes):
                    if abs(robot.capsule_specs[i].body - robot.capsule_specs[j].body) < 2:
                        same_or_adjacent += 1
            assert len(robot.collision_pairs) == total - same_or_adjacent

    def test_economic_validation(self):
        with pytest.raises(ConstraintViolation):
            build_robot(DesignParams(DesignMode.ECONOMIC, rows=np.array([[0.05, 0.2, 0.0]])))
        with pytest.raises(ConstraintViolation):
            build_robot(DesignParams(DesignMode.ECONOMIC, rows=np.array([[0.2, 0.2, 0.3]])))
        build_robot(DesignParams(DesignMode.ECONOMIC, rows=np.array([[0.2, -0.3, math.pi / 2]])))

    def test_bad_slot(self):
        cat = default_catalog()
        with pytest.raises(BadSlot):
            build_robot(DesignParams(DesignMode.MODULAR, slots=(0, 9)), cat)


class TestForwardKinematics:
    def test_hand_example(self):
        robot = build_robot(free_params([[0.3, 0.2, 0.0]]))
        _, ee = forward_kinematics(robot, [0.0])
        np.testing.assert_allclose(ee.position, [0.2, 0, 0.3], atol=1e-15)
        np.testing.assert_allclose(ee.rotation.matrix, np.eye(3), atol=1e-15)

    def test_quarter_turn(self):
        robot = build_robot(free_params([[0.3, 0.2, 0.0]]))
        _, ee = forward_kinematics(robot, [math.pi / 2])
        np.testing.assert_allclose(ee.position, [0, 0.2, 0.3], atol=1e-12)

    def test_against_matrix_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(1, 8)
            rows = random_free_rows(rng, n)
            q = rng.uniform(-math.pi, math.pi, n)
            robot = build_robot(free_params(rows))
            _, ee = forward_kinematics(robot, q)
            want = fk_oracle(rows, q)
            np.testing.assert_allclose(ee.matrix(), want, atol=1e-12)

    def test_base_pose_composition(self):
        rng = np.random.default_rng(1)
        rows = random_free_rows(rng, 3)
        q = rng.uniform(-math.pi, math.pi, 3)
        base = Pose(np.array([0.1, -0.2, 0.5]), Rotation.about_y(0.7))
        robot = build_robot(free_params(rows))
        _, ee = forward_kinematics(robot, q, base=base)
        want = fk_oracle(rows, q, base=base.matrix())
        np.testing.assert_allclose(ee.matrix(), want, atol=1e-12)

    def test_frames_orthonormal_batch(self):
        rng = np.random.default_rng(2)
        n, b = 6, 100000
        rows = torch.as_tensor(random_free_rows(rng, n), dtype=DT).expand(b, n, 3)
        rows = rows.clone()
        rows += torch.as_tensor(rng.uniform(-0.01, 0.01, (b, n, 3)))
        q = torch.as_tensor(rng.uniform(-math.pi, math.pi, (b, n)), dtype=DT)
        prox = torch.eye(4, dtype=DT).expand(n, 4, 4)
        _, _, frames = fk_frames_t(q, prox, rows=rows)
        rot = frames[..., :3, :3]
        eye = torch.eye(3, dtype=DT)
        err = (rot.transpose(-1, -2) @ rot - eye).abs().max()
        assert float(err) < 1e-9

    def test_modular_fk_matches_dh_rows(self):
        # catalog distal transforms are dh rows, so modular FK must agree
        cat = default_catalog()
        dh = {"direct": (0.10, 0.0, 0.0), "short_parallel": (0.25, 0.0, 0.0),
              "long_parallel": (0.40, 0.0, 0.0), "short_orthogonal": (0.10, 0.15, math.pi / 2),
              "long_orthogonal": (0.10, 0.30, math.pi / 2)}
        rng = np.random.default_rng(3)
        for _ in range(20):
            slots = tuple(int(s) for s in rng.integers(0, 5, 4))
            robot = build_robot(DesignParams(DesignMode.MODULAR, slots=slots), cat)
            q = rng.uniform(-math.pi, math.pi, 4)
            _, ee = forward_kinematics(robot, q)
            rows = np.array([dh[cat.choices[s].id] for s in slots])
            want = fk_oracle(rows, q)
            np.testing.assert_allclose(ee.matrix(), want, atol=1e-12)


class TestJacobian:
    def test_hand_column(self):
        robot = build_robot(free_params([[0.0, 0.2, 0.0]]))
        jac = geometric_jacobian(robot, [0.0])
        np.testing.assert_allclose(jac[:, 0], [0, 0.2, 0, 0, 0, 1], atol=1e-15)

    def test_linear_part_finite_differences(self):
        rng = np.random.default_rng(4)
        step = 1e-6
        for _ in range(20):
            n = int(rng.integers(2, 7))
            rows = random_free_rows(rng, n)
            robot = build_robot(free_params(rows))
            q = rng.uniform(-math.pi, math.pi, n)
            jac = geometric_jacobian(robot, q)
            for i in range(n):
                qp, qm = q.copy(), q.copy()
                qp[i] += step
                qm[i] -= step
                _, ee_p = forward_kinematics(robot, qp)
                _, ee_m = forward_kinematics(robot, qm)
                fd = (ee_p.position - ee_m.position) / (2 * step)
                denom = max(np.abs(fd).max(), np.abs(jac[:3, i]).max(), 1e-6)
                assert np.abs(fd - jac[:3, i]).max() / denom < 1e-5

    def test_zero_length_robot(self):
        robot = build_robot(free_params([[0.0, 0.0, 0.0]] * 3))
        jac = geometric_jacobian(robot, [0.3, -0.2, 0.9])
        np.testing.assert_allclose(jac[:3], 0.0, atol=1e-15)
        for i in range(3):
            np.testing.assert_allclose(jac[3:, i], [0, 0, 1], atol=1e-15)

    def test_angular_columns_unit_norm(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            rows = random_free_rows(rng, 5)
            robot = build_robot(free_params(rows))
            q = rng.uniform(-math.pi, math.pi, 5)
            jac = geometric_jacobian(robot, q)
            norms = np.linalg.norm(jac[3:], axis=0)
            np.testing.assert_allclose(norms, 1.0, atol=1e-9)


class TestEnumerate:
    def test_counts(self):
        cat = default_catalog()
        assert assembly_count(cat, 6) == 15625
        assert sum(1 for _ in enumerate_assemblies(cat, 1)) == 5
        assert sum(1 for _ in enumerate_assemblies(cat, 4)) == 625

    def test_uniqueness_and_determinism(self):
        cat = default_catalog()
        seen = set()
        for params in enumerate_assemblies(cat, 4):
            assert params.slots not in seen
            seen.add(params.slots)
        assert len(seen) == 625
        first = list(itertools.islice(enumerate_assemblies(cat, 4), 10))
        second = list(itertools.islice(enumerate_assemblies(cat, 4), 10))
        assert [a.slots for a in first] == [b.slots for b in second]


class TestJointAnglesFromXY:
    def test_examples(self):
        assert joint_angles_from_xy(np.array([[0.0, 1.0]]))[0] == 0.0
        assert joint_angles_from_xy(np.array([[1.0, 0.0]]))[0] == pytest.approx(math.pi / 2)

    def test_scale_invariance(self):
        rng = np.random.default_rng(6)
        xy = rng.normal(size=(5, 2))
        k = rng.uniform(0.1, 10)
        np.testing.assert_allclose(
            joint_angles_from_xy(xy), joint_angles_from_xy(k * xy), atol=1e-12
        )

    def test_degenerate(self):
        with pytest.raises(DegeneratePair):
            joint_angles_from_xy(np.array([[0.0, 0.0]]))

    def test_range(self):
        rng = np.random.default_rng(7)
        q = joint_angles_from_xy(rng.normal(size=(1000, 2)))
        assert np.all(q >= -math.pi) and np.all(q <= math.pi)


class TestCatalog:
    def test_roundtrip(self, tmp_path):
        cat = default_catalog()
        path = tmp_path / "cat.json"
        cat.save(path)
        loaded = ModuleCatalog.load(path)
        assert len(loaded.choices) == len(cat.choices)
        for a, b in zip(cat.choices, loaded.choices):
            assert a.id == b.id and a.cost == b.cost
            np.testing.assert_array_equal(a.distal.matrix(), b.distal.matrix())

    def test_total_reach(self):
        cat = default_catalog()
        p = DesignParams(DesignMode.MODULAR, slots=(0, 2))
        assert total_reach(p, cat) == pytest.approx(0.5)
        p2 = free_params([[0.3, -0.2, 0.1]])
        assert total_reach(p2) == pytest.approx(0.5)


def test_wrap_angles():
    q = np.array([0.0, math.pi + 0.1, -math.pi - 0.1, 3 * math.pi])
    w = wrap_angles(q)
    assert np.all(w >= -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.cos(w), np.cos(q), atol=1e-12)
    np.testing.assert_allclose(np.sin(w), np.sin(q), atol=1e-12)
