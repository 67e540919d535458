// three.js scene-graph builders. All robot geometry comes verbatim from the
// server's render payload; the client never runs kinematics.

import * as THREE from "three";
import { orientation6dToMatrix } from "./gizmo";
import type { CapsuleGeom, RenderCandidate, SceneDoc } from "./types";

const GOAL_AXIS_LEN = 0.08;

export function capsuleMesh(cap: CapsuleGeom, material: THREE.Material): THREE.Object3D {
  const a = new THREE.Vector3(...cap.a);
  const b = new THREE.Vector3(...cap.b);
  const length = a.distanceTo(b);
  const geom = new THREE.CapsuleGeometry(cap.radius, Math.max(length, 1e-6), 8, 16);
  const mesh = new THREE.Mesh(geom, material);
  // CapsuleGeometry extends along +Y; align it with the segment
  const mid = a.clone().add(b).multiplyScalar(0.5);
  mesh.position.copy(mid);
  if (length > 1e-9) {
    const dir = b.clone().sub(a).normalize();
    mesh.quaternion.setFromUnitVectors(new THREE.Vector3(0, 1, 0), dir);
  }
  return mesh;
}

export function goalMarker(
  position: [number, number, number],
  orientation6d: [number, number, number, number, number, number],
): THREE.Object3D {
  const group = new THREE.Group();
  const m3 = orientation6dToMatrix(orientation6d);
  const m4 = new THREE.Matrix4().setFromMatrix3(m3);
  group.quaternion.setFromRotationMatrix(m4);
  group.position.set(...position);
  const axes = [
    { dir: new THREE.Vector3(1, 0, 0), color: 0xcc3333 },
    { dir: new THREE.Vector3(0, 1, 0), color: 0x33aa33 },
    { dir: new THREE.Vector3(0, 0, 1), color: 0x3344cc },
  ];
  for (const { dir, color } of axes) {
    group.add(new THREE.ArrowHelper(dir, new THREE.Vector3(), GOAL_AXIS_LEN, color));
  }
  return group;
}

export function buildSceneGraph(doc: SceneDoc): THREE.Group {
  const root = new THREE.Group();
  root.name = "task-scene";
  for (const goal of doc.goals) {
    const marker = goalMarker(goal.position, goal.orientation6d);
    marker.name = `goal:${goal.id}`;
    root.add(marker);
  }
  const obstacleMat = new THREE.MeshStandardMaterial({ color: 0xbb4444, transparent: true, opacity: 0.85 });
  for (const obs of doc.obstacles) {
    let mesh: THREE.Object3D;
    if (obs.type === "sphere") {
      mesh = new THREE.Mesh(new THREE.SphereGeometry(obs.radius, 24, 16), obstacleMat);
      mesh.position.set(...obs.center);
    } else {
      mesh = capsuleMesh({ a: obs.a, b: obs.b, radius: obs.radius }, obstacleMat);
    }
    mesh.name = `obstacle:${obs.id}`;
    root.add(mesh);
  }
  return root;
}

/** Robot capsules for one candidate at one goal's configuration. */
export function buildRobotGraph(candidate: RenderCandidate, goalIndex: number): THREE.Group {
  const root = new THREE.Group();
  root.name = `robot:goal${goalIndex}`;
  const entry = candidate.per_goal[goalIndex];
  const mat = new THREE.MeshStandardMaterial({ color: 0x3f9e55, transparent: true, opacity: 0.75 });
  for (const cap of entry.capsules) {
    root.add(capsuleMesh(cap, mat));
  }
  return root;
}

/** World-frame capsule endpoints as rendered, for parity checks. */
export function renderedCapsules(group: THREE.Group): CapsuleGeom[] {
  const out: CapsuleGeom[] = [];
  group.updateMatrixWorld(true);
  for (const child of group.children) {
    const mesh = child as THREE.Mesh;
    const geom = mesh.geometry as THREE.CapsuleGeometry;
    const params = geom.parameters as { radius: number; height: number };
    const half = params.height / 2;
    const a = mesh.localToWorld(new THREE.Vector3(0, -half, 0));
    const b = mesh.localToWorld(new THREE.Vector3(0, half, 0));
    out.push({ a: [a.x, a.y, a.z], b: [b.x, b.y, b.z], radius: params.radius });
  }
  return out;
}
