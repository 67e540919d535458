// Client mirrors of the server JSON schemas. All lengths in meters, angles
// in radians; degrees appear only in display formatting.

export type ToleranceMode = "full_pose" | "rot_symmetric" | "position_only";

export interface GoalDoc {
  id: string;
  position: [number, number, number];
  orientation6d: [number, number, number, number, number, number];
  tolerance: ToleranceMode;
}

export interface SphereObstacleDoc {
  id: string;
  type: "sphere";
  center: [number, number, number];
  radius: number;
}

export interface CapsuleObstacleDoc {
  id: string;
  type: "capsule";
  a: [number, number, number];
  b: [number, number, number];
  radius: number;
}

export type ObstacleDoc = SphereObstacleDoc | CapsuleObstacleDoc;

export interface PoseDoc {
  position: [number, number, number];
  orientation6d: [number, number, number, number, number, number];
}

export interface SceneDoc {
  goals: GoalDoc[];
  obstacles: ObstacleDoc[];
  base_pose?: PoseDoc;
  seed?: number;
}

export interface CapsuleGeom {
  a: [number, number, number];
  b: [number, number, number];
  radius: number;
}

export interface RenderGoalEntry {
  goal_id: string;
  q: number[];
  capsules: CapsuleGeom[];
  joint_frames: PoseDoc[];
  solved: boolean;
  pos_error_m: number;
  rot_error_rad: number;
}

export interface LossBreakdownDoc {
  distance: number;
  collision: number;
  hardware: number;
  regularization: number;
  total: number;
}

export interface RenderCandidate {
  params: unknown;
  loss: LossBreakdownDoc;
  benchmark_loss: number;
  solved_goals: number;
  per_goal: RenderGoalEntry[];
}

export interface DesignResult {
  kind: string;
  candidates: Array<{
    params: unknown;
    ik: { q: number[][]; alternates: number[][][] };
    loss: LossBreakdownDoc;
    benchmark_loss: number;
    solved_goals: number;
  }>;
  render: { candidates: RenderCandidate[] };
  scene_revision: number;
}

export interface JobInfo {
  id: string;
  kind: string;
  scene_id: string;
  status: "queued" | "running" | "done" | "failed";
  progress: number;
  reason: string | null;
  scene_revision: number;
}

export interface ProgressEvent {
  type: string;
  stage?: string;
  candidate?: number;
  progress?: number;
  status?: string;
  reason?: string;
  [key: string]: unknown;
}
