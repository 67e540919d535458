// The studio's single source of truth: the scene mirror with its server
// revision tag, the selected candidate/goal, the job monitor, and the
// comparison set. Candidate history is keyed by scene revision so the
// effect of each what-if edit stays visible.

import type { DesignResult, JobInfo, ProgressEvent, SceneDoc, ToleranceMode } from "./types";
import type { StudioApi } from "./api";
import { dragGoal, dragObstacle, rotateGoal } from "./gizmo";

export interface JobMonitor {
  id: string;
  status: string;
  progress: number;
  stage: string;
  reason?: string;
}

export interface ResultEntry {
  jobId: string;
  sceneRevision: number;
  result: DesignResult;
}

type Listener = () => void;

export class StudioState {
  sceneId: string | null = null;
  revision = 0;
  scene: SceneDoc | null = null;
  dirty = false;
  validationError: string | null = null;

  job: JobMonitor | null = null;
  results: ResultEntry[] = [];
  activeResult: ResultEntry | null = null;
  selectedCandidate = 0;
  selectedGoal = 0;
  comparison: number[] = [];

  private listeners: Listener[] = [];

  constructor(private api: StudioApi) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify() {
    for (const fn of this.listeners) fn();
  }

  // --- scene editing -------------------------------------------------------

  async loadScene(id: string): Promise<void> {
    const got = await this.api.getScene(id);
    this.sceneId = got.id;
    this.revision = got.revision;
    this.scene = got.scene;
    this.dirty = false;
    this.validationError = null;
    this.notify();
  }

  async createScene(doc: SceneDoc): Promise<string> {
    const created = await this.api.createScene(doc);
    this.sceneId = created.id;
    this.revision = created.revision;
    this.scene = doc;
    this.dirty = false;
    this.notify();
    return created.id;
  }

  moveGoal(goalId: string, delta: [number, number, number]): void {
    if (!this.scene) return;
    this.scene = {
      ...this.scene,
      goals: this.scene.goals.map((g) => (g.id === goalId ? dragGoal(g, delta) : g)),
    };
    this.dirty = true;
    this.notify();
  }

  rotateGoal(goalId: string, axis: [number, number, number], angle: number): void {
    if (!this.scene) return;
    this.scene = {
      ...this.scene,
      goals: this.scene.goals.map((g) => (g.id === goalId ? rotateGoal(g, axis, angle) : g)),
    };
    this.dirty = true;
    this.notify();
  }

  setTolerance(goalId: string, tolerance: ToleranceMode): void {
    if (!this.scene) return;
    this.scene = {
      ...this.scene,
      goals: this.scene.goals.map((g) => (g.id === goalId ? { ...g, tolerance } : g)),
    };
    this.dirty = true;
    this.notify();
  }

  moveObstacle(obstacleId: string, delta: [number, number, number]): void {
    if (!this.scene) return;
    this.scene = {
      ...this.scene,
      obstacles: this.scene.obstacles.map((o) =>
        o.id === obstacleId ? dragObstacle(o, delta) : o,
      ),
    };
    this.dirty = true;
    this.notify();
  }

  /** Persist edits; surfaces 400 validation messages without clearing them. */
  async saveScene(): Promise<boolean> {
    if (!this.scene || !this.sceneId) return false;
    try {
      const updated = await this.api.updateScene(this.sceneId, this.scene, this.revision);
      this.revision = updated.revision;
      this.dirty = false;
      this.validationError = null;
      this.notify();
      return true;
    } catch (err) {
      this.validationError = err instanceof Error ? err.message : String(err);
      this.notify();
      return false;
    }
  }

  // --- jobs ----------------------------------------------------------------

  async submitDesign(config: unknown): Promise<string> {
    if (!this.sceneId) throw new Error("no scene loaded");
    if (this.dirty) throw new Error("save the scene before submitting");
    const jobId = await this.api.submitJob("design", this.sceneId, config);
    this.job = { id: jobId, status: "queued", progress: 0, stage: "queued" };
    this.notify();
    return jobId;
  }

  onProgress(name: string, event: ProgressEvent): void {
    if (!this.job) return;
    if (name === "progress") {
      this.job.status = "running";
      this.job.progress = Math.max(this.job.progress, Number(event.progress ?? 0));
      this.job.stage = String(event.stage ?? this.job.stage);
    } else if (name === "status" || name === "end") {
      if (event.status) this.job.status = String(event.status);
      if (event.reason) this.job.reason = String(event.reason);
      if (event.progress !== undefined) {
        this.job.progress = Math.max(this.job.progress, Number(event.progress));
      }
    }
    this.notify();
  }

  async watchJob(jobId: string): Promise<JobInfo> {
    const info = await this.api.monitorJob(jobId, (name, ev) => this.onProgress(name, ev));
    if (this.job && this.job.id === jobId) {
      this.job.status = info.status;
      this.job.progress = info.progress;
      if (info.reason) this.job.reason = info.reason;
    }
    if (info.status === "done") {
      const result = await this.api.getResult(jobId);
      const entry: ResultEntry = {
        jobId,
        sceneRevision: result.scene_revision,
        result,
      };
      this.results.push(entry); // previous candidates stay for comparison
      this.activeResult = entry;
      this.selectedCandidate = 0;
      this.selectedGoal = 0;
    }
    this.notify();
    return info;
  }

  async cancelJob(): Promise<void> {
    if (this.job) await this.api.cancelJob(this.job.id);
  }

  // --- browsing ------------------------------------------------------------

  /** The displayed result no longer matches the edited scene. */
  get staleResult(): boolean {
    return this.activeResult !== null && this.activeResult.sceneRevision !== this.revision;
  }

  selectCandidate(index: number): void {
    this.selectedCandidate = index;
    this.notify();
  }

  selectGoal(index: number): void {
    this.selectedGoal = index;
    this.notify();
  }

  toggleComparison(index: number): void {
    if (this.comparison.includes(index)) {
      this.comparison = this.comparison.filter((i) => i !== index);
    } else {
      this.comparison = [...this.comparison.slice(-1), index];
    }
    this.notify();
  }
}
