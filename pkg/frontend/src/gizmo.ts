// Pose editing math behind the viewport gizmos: translation drags and
// rotation twirls mutate the scene mirror, serialized as position plus the
// 6-value orientation (first two rotation-matrix columns).

import * as THREE from "three";
import type { GoalDoc, ObstacleDoc } from "./types";

export function orientation6dToMatrix(
  r6: [number, number, number, number, number, number],
): THREE.Matrix3 {
  const a1 = new THREE.Vector3(r6[0], r6[1], r6[2]);
  const a2 = new THREE.Vector3(r6[3], r6[4], r6[5]);
  const b1 = a1.clone().normalize();
  const b2 = a2.clone().addScaledVector(b1, -b1.dot(a2)).normalize();
  const b3 = new THREE.Vector3().crossVectors(b1, b2);
  const m = new THREE.Matrix3();
  m.set(b1.x, b2.x, b3.x, b1.y, b2.y, b3.y, b1.z, b2.z, b3.z);
  return m;
}

export function matrixToOrientation6d(m: THREE.Matrix3): [number, number, number, number, number, number] {
  const e = m.elements; // column-major
  return [e[0], e[1], e[2], e[3], e[4], e[5]];
}

/** Translate a goal by a world-frame delta (gizmo drag). */
export function dragGoal(goal: GoalDoc, delta: [number, number, number]): GoalDoc {
  return {
    ...goal,
    position: [
      goal.position[0] + delta[0],
      goal.position[1] + delta[1],
      goal.position[2] + delta[2],
    ],
  };
}

/** Rotate a goal about a world axis by `angle` radians (gizmo twirl). */
export function rotateGoal(
  goal: GoalDoc,
  axis: [number, number, number],
  angle: number,
): GoalDoc {
  const current = orientation6dToMatrix(goal.orientation6d);
  const q = new THREE.Quaternion().setFromAxisAngle(
    new THREE.Vector3(...axis).normalize(),
    angle,
  );
  const rot = new THREE.Matrix3().setFromMatrix4(new THREE.Matrix4().makeRotationFromQuaternion(q));
  const out = rot.clone().multiply(current);
  return { ...goal, orientation6d: matrixToOrientation6d(out) };
}

export function dragObstacle(obstacle: ObstacleDoc, delta: [number, number, number]): ObstacleDoc {
  const shift = (p: [number, number, number]): [number, number, number] => [
    p[0] + delta[0],
    p[1] + delta[1],
    p[2] + delta[2],
  ];
  if (obstacle.type === "sphere") {
    return { ...obstacle, center: shift(obstacle.center) };
  }
  return { ...obstacle, a: shift(obstacle.a), b: shift(obstacle.b) };
}
