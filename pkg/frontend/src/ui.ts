// DOM panels: scene editor sidebar, job monitor, candidate browser with
// per-goal badges and loss tables. Pure functions of the studio state, so
// they render identically under jsdom.

import type { StudioState } from "./state";
import type { LossBreakdownDoc, RenderCandidate } from "./types";

const RAD2DEG = 180 / Math.PI;

export function formatErrors(posM: number, rotRad: number): string {
  return `${(posM * 1000).toFixed(2)} mm / ${(rotRad * RAD2DEG).toFixed(2)} deg`;
}

function lossTable(loss: LossBreakdownDoc): string {
  const rows = (Object.keys(loss) as Array<keyof LossBreakdownDoc>)
    .map((k) => `<tr><td>${k}</td><td>${loss[k].toFixed(6)}</td></tr>`)
    .join("");
  return `<table class="loss-table">${rows}</table>`;
}

export function renderStaleBanner(state: StudioState): string {
  if (!state.staleResult) return "";
  return `<div class="banner stale" data-testid="stale-banner">
    Scene was edited (revision ${state.revision}) after this result
    (revision ${state.activeResult?.sceneRevision}); re-run the design job.
  </div>`;
}

export function renderValidationBanner(state: StudioState): string {
  if (!state.validationError) return "";
  return `<div class="banner error" data-testid="validation-banner">${state.validationError}</div>`;
}

export function renderSceneEditor(state: StudioState): string {
  if (!state.scene) return `<p>No scene loaded.</p>`;
  const goals = state.scene.goals
    .map(
      (g, i) => `
      <li data-goal="${g.id}" class="${i === state.selectedGoal ? "selected" : ""}">
        <span class="goal-id">${g.id}</span>
        <span class="pos">(${g.position.map((v) => v.toFixed(3)).join(", ")}) m</span>
        <select data-tolerance="${g.id}">
          ${(["full_pose", "rot_symmetric", "position_only"] as const)
            .map((t) => `<option value="${t}" ${t === g.tolerance ? "selected" : ""}>${t}</option>`)
            .join("")}
        </select>
      </li>`,
    )
    .join("");
  const dirty = state.dirty ? `<span class="dirty" data-testid="dirty-flag">unsaved edits</span>` : "";
  return `<div class="scene-editor">
    <h3>Scene ${state.sceneId ?? ""} <small>rev ${state.revision}</small> ${dirty}</h3>
    ${renderValidationBanner(state)}
    <ul class="goal-list">${goals}</ul>
    <p>${state.scene.obstacles.length} obstacles</p>
    <button data-action="save" ${state.dirty ? "" : "disabled"}>Save scene</button>
    <button data-action="design" ${state.dirty ? "disabled" : ""}>Design</button>
  </div>`;
}

export function renderJobMonitor(state: StudioState): string {
  if (!state.job) return "";
  const pct = Math.round(state.job.progress * 100);
  const reason = state.job.reason ? ` (${state.job.reason})` : "";
  return `<div class="job-monitor" data-testid="job-monitor" data-status="${state.job.status}">
    <span class="stage">${state.job.stage}</span>
    <progress max="100" value="${pct}"></progress> ${pct}%
    <span class="status">${state.job.status}${reason}</span>
    <button data-action="cancel" ${state.job.status === "running" || state.job.status === "queued" ? "" : "disabled"}>Cancel</button>
  </div>`;
}

function candidateRow(c: RenderCandidate, index: number, state: StudioState): string {
  const selected = index === state.selectedCandidate ? "selected" : "";
  const compared = state.comparison.includes(index) ? "checked" : "";
  return `<li class="${selected}" data-candidate="${index}">
    <span>#${index}</span>
    <span>loss ${c.benchmark_loss.toFixed(4)}</span>
    <span>${c.solved_goals}/${c.per_goal.length} solved</span>
    <input type="checkbox" data-compare="${index}" ${compared} />
  </li>`;
}

export function renderCandidateBrowser(state: StudioState): string {
  const entry = state.activeResult;
  if (!entry) return `<p>No results yet.</p>`;
  const candidates = entry.result.render.candidates;
  const list = candidates.map((c, i) => candidateRow(c, i, state)).join("");
  const active = candidates[state.selectedCandidate];
  const goals = active.per_goal
    .map((g, i) => {
      const badge = g.solved
        ? `<span class="badge solved" data-testid="badge-${g.goal_id}">solved</span>`
        : `<span class="badge unsolved" data-testid="badge-${g.goal_id}">${formatErrors(
            g.pos_error_m,
            g.rot_error_rad,
          )}</span>`;
      return `<button data-goal-index="${i}" class="${i === state.selectedGoal ? "selected" : ""}">
        ${g.goal_id} ${badge}</button>`;
    })
    .join("");
  const compare =
    state.comparison.length === 2
      ? `<div class="compare" data-testid="compare">
          ${state.comparison
            .map((i) => `<div><h4>#${i}</h4>${lossTable(candidates[i].loss)}</div>`)
            .join("")}
        </div>`
      : "";
  return `<div class="candidate-browser">
    ${renderStaleBanner(state)}
    <ul class="candidate-list">${list}</ul>
    <div class="goal-scrubber">${goals}</div>
    ${lossTable(active.loss)}
    ${compare}
  </div>`;
}

export function renderApp(state: StudioState): string {
  return `<div class="studio">
    <aside>${renderSceneEditor(state)}${renderJobMonitor(state)}</aside>
    <main id="viewport"></main>
    <aside>${renderCandidateBrowser(state)}</aside>
  </div>`;
}
