import { describe, expect, it } from "vitest";
import * as THREE from "three";
import {
  dragGoal,
  dragObstacle,
  matrixToOrientation6d,
  orientation6dToMatrix,
  rotateGoal,
} from "../src/gizmo";
import type { GoalDoc } from "../src/types";

const identityGoal: GoalDoc = {
  id: "g0",
  position: [0.1, 0.2, 0.3],
  orientation6d: [1, 0, 0, 0, 1, 0],
  tolerance: "full_pose",
};

describe("orientation6d", () => {
  it("maps the identity", () => {
    const m = orientation6dToMatrix([1, 0, 0, 0, 1, 0]);
    expect(m.elements).toEqual([1, 0, 0, 0, 1, 0, 0, 0, 1]);
  });

  it("orthonormalizes unnormalized input", () => {
    const m = orientation6dToMatrix([2, 0, 0, 1, 1, 0]);
    expect(m.elements[0]).toBeCloseTo(1, 12);
    expect(m.elements[4]).toBeCloseTo(1, 12);
  });

  it("round-trips through the first two columns", () => {
    const q = new THREE.Quaternion().setFromEuler(new THREE.Euler(0.3, -0.7, 1.1));
    const m4 = new THREE.Matrix4().makeRotationFromQuaternion(q);
    const m3 = new THREE.Matrix3().setFromMatrix4(m4);
    const r6 = matrixToOrientation6d(m3);
    const back = orientation6dToMatrix(r6);
    for (let i = 0; i < 9; i++) {
      expect(back.elements[i]).toBeCloseTo(m3.elements[i], 10);
    }
  });
});

describe("gizmo edits", () => {
  it("drags a goal by a world delta", () => {
    const out = dragGoal(identityGoal, [0.1, 0, -0.05]);
    expect(out.position).toEqual([0.2, 0.2, 0.25]);
    expect(out.orientation6d).toEqual(identityGoal.orientation6d);
  });

  it("rotates a goal about z", () => {
    const out = rotateGoal(identityGoal, [0, 0, 1], Math.PI / 2);
    const m = orientation6dToMatrix(out.orientation6d);
    // column 1 of Rz(90deg) is (0, 1, 0)
    expect(m.elements[0]).toBeCloseTo(0, 12);
    expect(m.elements[1]).toBeCloseTo(1, 12);
    expect(out.position).toEqual(identityGoal.position);
  });

  it("moves both capsule endpoints of an obstacle", () => {
    const out = dragObstacle(
      { id: "o", type: "capsule", a: [0, 0, 0], b: [0.2, 0, 0], radius: 0.05 },
      [0, 0.1, 0],
    );
    expect(out).toMatchObject({ a: [0, 0.1, 0], b: [0.2, 0.1, 0] });
  });
});
