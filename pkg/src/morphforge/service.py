"""HTTP facade for the design studio: scene storage with optimistic
revisions, asynchronous design jobs on a bounded worker pool, server-sent
progress events, and render-ready results.

Persistence is plain JSON files under the data directory; results are
immutable blobs written once, so repeated reads are byte-identical and the
store survives restarts (jobs found running at startup are marked failed).
"""

from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from .errors import JobCancelled, MorphForgeError, ParseError, ValidationError
from .kinematics import DesignMode, ModuleCatalog, default_catalog
from .objective import LossWeights
from .render import build_render_model
from .scene import Scene, scene_from_dict, scene_to_dict
from .search import GAConfig, brute_force, genetic_search
from .solver import SolverConfig, design_task

JOB_KINDS = ("design", "brute_force", "ga", "evaluate")
QUEUE_LIMIT = 64


def _ulid(rng: np.random.Generator | None = None) -> str:
    """Time-ordered 26-char identifier (crockford base32)."""
    alphabet = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
    ts = int(time.time() * 1000) & ((1 << 48) - 1)
    rand = int.from_bytes(os.urandom(10), "big")
    value = (ts << 80) | rand
    chars = []
    for _ in range(26):
        chars.append(alphabet[value & 31])
        value >>= 5
    return "".join(reversed(chars))


def canonical_json(obj) -> bytes:
    return json.dumps(obj, indent=2, sort_keys=True).encode()


@dataclass
class JobRecord:
    id: str
    kind: str
    scene_id: str
    config: dict
    status: str = "queued"  # queued -> running -> done | failed
    progress: float = 0.0
    reason: str | None = None
    scene_revision: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class Store:
    """File-backed storage with per-entity locks and revision counters."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        for sub in ("scenes", "jobs", "results"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._entity_locks: dict[str, threading.Lock] = {}

    def _lock_for(self, key: str) -> threading.Lock:
        with self._lock:
            return self._entity_locks.setdefault(key, threading.Lock())

    # scenes -----------------------------------------------------------------
    def scene_path(self, scene_id: str) -> Path:
        return self.root / "scenes" / f"{scene_id}.json"

    def create_scene(self, doc: dict) -> tuple[str, int]:
        scene_id = _ulid()
        with self._lock_for(f"scene:{scene_id}"):
            payload = {"scene": doc, "revision": 1}
            self.scene_path(scene_id).write_bytes(canonical_json(payload))
        return scene_id, 1

    def get_scene(self, scene_id: str) -> tuple[dict, int] | None:
        path = self.scene_path(scene_id)
        if not path.exists():
            return None
        payload = json.loads(path.read_bytes())
        return payload["scene"], int(payload["revision"])

    def update_scene(self, scene_id: str, doc: dict, expected_revision: int) -> int | None:
        with self._lock_for(f"scene:{scene_id}"):
            current = self.get_scene(scene_id)
            if current is None:
                return None
            _, revision = current
            if revision != expected_revision:
                return -1
            new_rev = revision + 1
            payload = {"scene": doc, "revision": new_rev}
            self.scene_path(scene_id).write_bytes(canonical_json(payload))
            return new_rev

    def delete_scene(self, scene_id: str) -> bool:
        with self._lock_for(f"scene:{scene_id}"):
            path = self.scene_path(scene_id)
            if not path.exists():
                return False
            path.unlink()
            return True

    # jobs -------------------------------------------------------------------
    def job_path(self, job_id: str) -> Path:
        return self.root / "jobs" / f"{job_id}.json"

    def save_job(self, job: JobRecord) -> None:
        with self._lock_for(f"job:{job.id}"):
            self.job_path(job.id).write_bytes(canonical_json(job.to_dict()))

    def get_job(self, job_id: str) -> JobRecord | None:
        path = self.job_path(job_id)
        if not path.exists():
            return None
        return JobRecord(**json.loads(path.read_bytes()))

    def jobs_for_scene(self, scene_id: str) -> list[str]:
        out = []
        for path in (self.root / "jobs").glob("*.json"):
            job = JobRecord(**json.loads(path.read_bytes()))
            if job.scene_id == scene_id:
                out.append(job.id)
        return out

    def delete_job(self, job_id: str) -> None:
        self.job_path(job_id).unlink(missing_ok=True)
        (self.root / "results" / f"{job_id}.json").unlink(missing_ok=True)

    # results ----------------------------------------------------------------
    def write_result(self, job_id: str, doc: dict) -> None:
        (self.root / "results" / f"{job_id}.json").write_bytes(canonical_json(doc))

    def read_result(self, job_id: str) -> bytes | None:
        path = self.root / "results" / f"{job_id}.json"
        return path.read_bytes() if path.exists() else None

    def recover_interrupted(self) -> None:
        for path in (self.root / "jobs").glob("*.json"):
            job = JobRecord(**json.loads(path.read_bytes()))
            if job.status in ("queued", "running"):
                job.status = "failed"
                job.reason = "interrupted"
                self.save_job(job)


class JobManager:
    """Bounded worker pool plus per-job event streams for SSE."""

    def __init__(self, store: Store, workers: int | None = None):
        self.store = store
        workers = workers or os.cpu_count() or 2
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self._lock = threading.Lock()
        self._pending = 0
        self._events: dict[str, list[dict]] = {}
        self._conditions: dict[str, threading.Condition] = {}
        self._cancelled: set[str] = set()

    def _condition(self, job_id: str) -> threading.Condition:
        with self._lock:
            return self._conditions.setdefault(job_id, threading.Condition())

    def emit(self, job_id: str, event: dict) -> None:
        cond = self._condition(job_id)
        with cond:
            self._events.setdefault(job_id, []).append(event)
            cond.notify_all()

    def events_since(self, job_id: str, index: int) -> list[dict]:
        with self._condition(job_id):
            return list(self._events.get(job_id, [])[index:])

    def wait_for_event(self, job_id: str, index: int, timeout: float) -> None:
        cond = self._condition(job_id)
        with cond:
            if len(self._events.get(job_id, [])) > index:
                return
            cond.wait(timeout)

    def cancel(self, job_id: str) -> None:
        with self._lock:
            self._cancelled.add(job_id)

    def is_cancelled(self, job_id: str) -> bool:
        with self._lock:
            return job_id in self._cancelled

    def submit(self, job: JobRecord, runner) -> bool:
        with self._lock:
            if self._pending >= QUEUE_LIMIT:
                return False
            self._pending += 1

        def wrapped():
            try:
                runner()
            finally:
                with self._lock:
                    self._pending -= 1

        self.pool.submit(wrapped)
        return True


def _run_job(manager: JobManager, store: Store, job: JobRecord, scene: Scene, catalog: ModuleCatalog):
    job.status = "running"
    store.save_job(job)
    manager.emit(job.id, {"type": "status", "status": "running", "progress": 0.0})
    cfg_doc = job.config or {}
    solver_cfg = SolverConfig.from_dict(cfg_doc.get("solver", {}))
    weights = LossWeights.from_dict(cfg_doc.get("weights", {}))
    mode = DesignMode(cfg_doc.get("mode", "modular"))
    dof = int(cfg_doc.get("dof", 6))

    stage_weight = {"ik": 0.2, "co_optimize": 0.5, "candidate_done": 1.0}

    def on_progress(event: dict):
        total = max(1, event.get("total", solver_cfg.n_candidates))
        frac = (event.get("candidate", 0) + stage_weight.get(event.get("stage"), 0.5)) / total
        job.progress = max(job.progress, min(1.0, frac))
        store.save_job(job)
        manager.emit(job.id, {"type": "progress", "stage": event.get("stage"), **{
            k: v for k, v in event.items() if k in ("candidate", "step", "loss", "best_loss")
        }, "progress": job.progress})

    try:
        if job.kind == "design":
            candidates = design_task(
                scene, mode, dof, solver_cfg, weights, catalog,
                progress=on_progress,
                should_cancel=lambda: manager.is_cancelled(job.id),
            )
            result = {
                "kind": "design",
                "config": {"mode": mode.value, "dof": dof, "solver": solver_cfg.to_dict()},
                "candidates": [c.to_dict() for c in candidates],
                "render": build_render_model(scene, candidates, catalog),
                "scene_revision": job.scene_revision,
            }
        elif job.kind == "evaluate":
            from .kinematics import DesignParams, build_robot, forward_kinematics
            from .objective import benchmark_loss, pose_errors, solved_check, total_loss

            params = DesignParams.from_dict(cfg_doc["params"])
            q = np.asarray(cfg_doc["q"], dtype=float)
            bd = total_loss(scene, params, q, weights, catalog)
            robot = build_robot(params, catalog)
            per_goal = []
            for g, goal in enumerate(scene.goals):
                _, ee = forward_kinematics(robot, q[:, g], base=scene.base_pose)
                pos_err, rot_err = pose_errors(goal, ee)
                per_goal.append(
                    {
                        "goal_id": goal.id,
                        "pos_error_m": pos_err,
                        "rot_error_rad": rot_err,
                        "solved": bool(solved_check(goal, ee)),
                    }
                )
            result = {
                "kind": "evaluate",
                "loss": bd.to_dict(),
                "benchmark_loss": benchmark_loss(bd, weights),
                "per_goal": per_goal,
                "scene_revision": job.scene_revision,
            }
        elif job.kind == "ga":
            ga_cfg = GAConfig.from_dict(cfg_doc.get("ga", {}))
            best, history = genetic_search(scene, catalog, dof, ga_cfg, solver_cfg, weights)
            result = {
                "kind": "ga",
                "best": best.to_dict(),
                "history": {"best": history.best, "mean": history.mean},
                "scene_revision": job.scene_revision,
            }
        elif job.kind == "brute_force":
            bf = brute_force(scene, catalog, dof, solver_cfg, weights, cap=int(cfg_doc.get("cap", 20000)))
            result = {
                "kind": "brute_force",
                "loss_min": bf.loss_min,
                "loss_max": bf.loss_max,
                "entries": [
                    {"slots": list(e.slots), "benchmark_loss": e.bench, "score": float(s), "solved_goals": e.solved_goals}
                    for e, s in zip(bf.entries, bf.scores)
                ],
                "scene_revision": job.scene_revision,
            }
        else:
            raise ValueError(f"unknown job kind {job.kind}")
        store.write_result(job.id, result)
        job.status = "done"
        job.progress = 1.0
        store.save_job(job)
        manager.emit(job.id, {"type": "status", "status": "done", "progress": 1.0})
    except JobCancelled:
        job.status = "failed"
        job.reason = "cancelled"
        store.save_job(job)
        manager.emit(job.id, {"type": "status", "status": "failed", "reason": "cancelled"})
    except Exception as exc:  # report, never crash the worker
        job.status = "failed"
        job.reason = f"{type(exc).__name__}: {exc}"
        store.save_job(job)
        manager.emit(job.id, {"type": "status", "status": "failed", "reason": job.reason})


def create_app(
    data_dir: str | Path | None = None,
    workers: int | None = None,
    catalog: ModuleCatalog | None = None,
) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("MF_DATA_DIR", "mf_data"))
    workers = workers or int(os.environ.get("MF_WORKERS", "0")) or None
    store = Store(data_dir)
    store.recover_interrupted()
    manager = JobManager(store, workers)
    catalog = catalog or default_catalog()
    app = FastAPI(title="morphforge")

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    # scenes -------------------------------------------------------------
    @app.post("/api/v1/scenes", status_code=201)
    async def create_scene(request: Request):
        try:
            doc = await request.json()
            scene = scene_from_dict(doc)
        except (ParseError, ValidationError, ValueError) as exc:
            return error(400, str(exc))
        scene_id, revision = store.create_scene(scene_to_dict(scene))
        return JSONResponse(
            {"id": scene_id, "revision": revision},
            status_code=201,
            headers={"ETag": str(revision)},
        )

    @app.get("/api/v1/scenes/{scene_id}")
    async def get_scene(scene_id: str):
        found = store.get_scene(scene_id)
        if found is None:
            return error(404, f"scene {scene_id} not found")
        doc, revision = found
        return JSONResponse(
            {"id": scene_id, "revision": revision, "scene": doc},
            headers={"ETag": str(revision)},
        )

    @app.put("/api/v1/scenes/{scene_id}")
    async def update_scene(scene_id: str, request: Request):
        if_match = request.headers.get("If-Match")
        if if_match is None:
            return error(428, "If-Match header with the current revision is required")
        try:
            doc = await request.json()
            scene = scene_from_dict(doc)
        except (ParseError, ValidationError, ValueError) as exc:
            return error(400, str(exc))
        result = store.update_scene(scene_id, scene_to_dict(scene), int(if_match))
        if result is None:
            return error(404, f"scene {scene_id} not found")
        if result == -1:
            return error(409, "revision conflict")
        return JSONResponse({"id": scene_id, "revision": result}, headers={"ETag": str(result)})

    @app.delete("/api/v1/scenes/{scene_id}")
    async def delete_scene(scene_id: str, cascade: bool = False):
        if store.get_scene(scene_id) is None:
            return error(404, f"scene {scene_id} not found")
        dependents = store.jobs_for_scene(scene_id)
        if dependents and not cascade:
            return error(409, f"{len(dependents)} dependent jobs exist; pass cascade=true to remove them")
        for job_id in dependents:
            store.delete_job(job_id)
        store.delete_scene(scene_id)
        return Response(status_code=204)

    # jobs ----------------------------------------------------------------
    @app.post("/api/v1/jobs", status_code=201)
    async def submit_job(request: Request):
        try:
            body = await request.json()
            kind = body["kind"]
            scene_id = body["scene_id"]
            config = body.get("config", {})
        except (KeyError, ValueError) as exc:
            return error(400, f"malformed job request: {exc}")
        if kind not in JOB_KINDS:
            return error(400, f"unknown job kind {kind!r}")
        found = store.get_scene(scene_id)
        if found is None:
            return error(404, f"scene {scene_id} not found")
        doc, revision = found
        try:
            scene = scene_from_dict(doc)
            if kind in ("design", "ga", "brute_force"):
                SolverConfig.from_dict(config.get("solver", {}))
        except (ParseError, ValidationError, ValueError, TypeError) as exc:
            return error(400, str(exc))
        job = JobRecord(id=_ulid(), kind=kind, scene_id=scene_id, config=config, scene_revision=revision)
        store.save_job(job)
        accepted = manager.submit(job, lambda: _run_job(manager, store, job, scene, catalog))
        if not accepted:
            store.delete_job(job.id)
            return error(429, "job queue full")
        return JSONResponse({"id": job.id}, status_code=201)

    @app.get("/api/v1/jobs/{job_id}")
    async def get_job(job_id: str):
        job = store.get_job(job_id)
        if job is None:
            return error(404, f"job {job_id} not found")
        return JSONResponse(job.to_dict())

    @app.post("/api/v1/jobs/{job_id}/cancel")
    async def cancel_job(job_id: str):
        job = store.get_job(job_id)
        if job is None:
            return error(404, f"job {job_id} not found")
        if job.status in ("done", "failed"):
            return error(409, f"job already {job.status}")
        manager.cancel(job_id)
        return JSONResponse({"id": job_id, "cancelling": True})

    @app.get("/api/v1/jobs/{job_id}/events")
    async def job_events(job_id: str):
        job = store.get_job(job_id)
        if job is None:
            return error(404, f"job {job_id} not found")

        def stream():
            index = 0
            while True:
                events = manager.events_since(job_id, index)
                for event in events:
                    yield f"id: {index}\nevent: {event.get('type', 'message')}\ndata: {json.dumps(event, sort_keys=True)}\n\n"
                    index += 1
                current = store.get_job(job_id)
                if current is not None and current.status in ("done", "failed") and not manager.events_since(job_id, index):
                    yield f"event: end\ndata: {json.dumps(current.to_dict(), sort_keys=True)}\n\n"
                    return
                before = index
                manager.wait_for_event(job_id, index, timeout=1.0)
                if not manager.events_since(job_id, before):
                    # keepalive at >= 1 Hz while running
                    snapshot = store.get_job(job_id)
                    payload = {} if snapshot is None else snapshot.to_dict()
                    yield f"event: keepalive\ndata: {json.dumps(payload, sort_keys=True)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/v1/jobs/{job_id}/result")
    async def job_result(job_id: str):
        job = store.get_job(job_id)
        if job is None:
            return error(404, f"job {job_id} not found")
        if job.status != "done":
            return error(409, f"job is {job.status}")
        raw = store.read_result(job_id)
        if raw is None:
            return error(409, "result missing")
        return Response(content=raw, media_type="application/json")

    app.state.store = store
    app.state.manager = manager
    return app


def serve(host: str = "127.0.0.1", port: int = 8080, data_dir=None, workers=None):
    import uvicorn

    bind = os.environ.get("MF_BIND_ADDR")
    if bind and ":" in bind:
        host, port_s = bind.rsplit(":", 1)
        port = int(port_s)
    app = create_app(data_dir=data_dir, workers=workers)
    uvicorn.run(app, host=host, port=port)
