// Browser entry point: wires the state store, the DOM panels, and the
// WebGL viewport (the only place a renderer is created).

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { TransformControls } from "three/examples/jsm/controls/TransformControls.js";
import { StudioApi } from "./api";
import { StudioState } from "./state";
import { buildRobotGraph, buildSceneGraph } from "./scene3d";
import { renderApp } from "./ui";
import type { GoalDoc } from "./types";

const DEFAULT_CONFIG = {
  mode: "modular",
  dof: 6,
  solver: { n_candidates: 8, rng_seed: 7 },
};

function setupViewport(container: HTMLElement) {
  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x151a21);
  const camera = new THREE.PerspectiveCamera(50, 4 / 3, 0.01, 50);
  camera.position.set(1.6, 1.2, 1.6);
  camera.up.set(0, 0, 1);
  const renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setSize(container.clientWidth || 800, container.clientHeight || 600);
  container.appendChild(renderer.domElement);
  scene.add(new THREE.AmbientLight(0xffffff, 0.6));
  const sun = new THREE.DirectionalLight(0xffffff, 1.2);
  sun.position.set(2, 3, 4);
  scene.add(sun);
  scene.add(new THREE.GridHelper(2, 20));
  const orbit = new OrbitControls(camera, renderer.domElement);
  const gizmo = new TransformControls(camera, renderer.domElement);
  gizmo.addEventListener("dragging-changed", (e) => {
    orbit.enabled = !(e as unknown as { value: boolean }).value;
  });
  scene.add(gizmo.getHelper());
  const loop = () => {
    requestAnimationFrame(loop);
    renderer.render(scene, camera);
  };
  loop();
  return { scene, camera, renderer, gizmo };
}

async function boot() {
  const api = new StudioApi("");
  const state = new StudioState(api);
  const app = document.getElementById("app")!;

  let viewport: ReturnType<typeof setupViewport> | null = null;
  let taskGroup: THREE.Group | null = null;
  let robotGroup: THREE.Group | null = null;

  const rebuild3d = () => {
    if (!viewport) return;
    if (taskGroup) viewport.scene.remove(taskGroup);
    if (robotGroup) viewport.scene.remove(robotGroup);
    if (state.scene) {
      taskGroup = buildSceneGraph(state.scene);
      viewport.scene.add(taskGroup);
    }
    const entry = state.activeResult;
    if (entry) {
      const cand = entry.result.render.candidates[state.selectedCandidate];
      robotGroup = buildRobotGraph(cand, state.selectedGoal);
      viewport.scene.add(robotGroup);
    }
  };

  const attachGizmo = () => {
    if (!viewport || !taskGroup || !state.scene) return;
    const goal = state.scene.goals[state.selectedGoal];
    if (!goal) return;
    const marker = taskGroup.getObjectByName(`goal:${goal.id}`);
    if (!marker) return;
    const before = marker.position.clone();
    viewport.gizmo.attach(marker);
    viewport.gizmo.addEventListener("mouseUp", () => {
      const delta = marker.position.clone().sub(before);
      state.moveGoal(goal.id, [delta.x, delta.y, delta.z]);
    });
  };

  const redraw = () => {
    app.innerHTML = renderApp(state);
    rebuild3d();
    attachGizmo();
    wire();
  };

  const wire = () => {
    app.querySelector('[data-action="save"]')?.addEventListener("click", () => {
      void state.saveScene();
    });
    app.querySelector('[data-action="design"]')?.addEventListener("click", async () => {
      const jobId = await state.submitDesign(DEFAULT_CONFIG);
      void state.watchJob(jobId);
    });
    app.querySelector('[data-action="cancel"]')?.addEventListener("click", () => {
      void state.cancelJob();
    });
    app.querySelectorAll("[data-candidate]").forEach((el) => {
      el.addEventListener("click", () => {
        state.selectCandidate(Number((el as HTMLElement).dataset.candidate));
      });
    });
    app.querySelectorAll("[data-goal-index]").forEach((el) => {
      el.addEventListener("click", () => {
        state.selectGoal(Number((el as HTMLElement).dataset.goalIndex));
      });
    });
    app.querySelectorAll("[data-compare]").forEach((el) => {
      el.addEventListener("change", () => {
        state.toggleComparison(Number((el as HTMLElement).dataset.compare));
      });
    });
    app.querySelectorAll("[data-tolerance]").forEach((el) => {
      el.addEventListener("change", () => {
        const select = el as HTMLSelectElement;
        state.setTolerance(
          select.dataset.tolerance!,
          select.value as GoalDoc["tolerance"],
        );
      });
    });
  };

  state.subscribe(redraw);
  redraw();
  const viewportEl = document.getElementById("viewport");
  if (viewportEl) {
    viewport = setupViewport(viewportEl);
  }

  const params = new URLSearchParams(window.location.search);
  const sceneId = params.get("scene");
  if (sceneId) await state.loadScene(sceneId);
}

void boot();
