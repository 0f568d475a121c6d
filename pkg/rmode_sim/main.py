import asyncio
import json
import traceback
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, model_validator
from sse_starlette.sse import EventSourceResponse  # type: ignore

from rmode_sim.config.settings import settings
from rmode_sim.config.state import finish, peek_progress_state, reset_progress_state, set_stage
from rmode_sim.errors import OutputError, RModeError, ScenarioValidationError
from rmode_sim.pipeline import STAGES, load_report, run_scenario
from rmode_sim.scenario import ScenarioConfig, load_scenario, parse_scenario, validate_scenario
from rmode_sim.utils.io import json_safe
from rmode_sim.utils.paths import data_dir, run_id_for

app = FastAPI(title="R-Mode Simulator")

# Only this many scenarios run at once; further requests wait for a slot
_run_slots = asyncio.Semaphore(settings.max_parallel_runs)


class ScenarioRequest(BaseModel):
    path: str | None = None
    scenario: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _one_source(self) -> "ScenarioRequest":
        if (self.path is None) == (self.scenario is None):
            raise ValueError("give exactly one of 'path' or 'scenario'")
        return self


class RunRequest(ScenarioRequest):
    out_dir: str | None = None
    seed_override: int | None = None


def _load(req: ScenarioRequest) -> ScenarioConfig:
    try:
        if req.path is not None:
            return load_scenario(req.path)
        return parse_scenario(req.scenario, source="<request>")
    except ScenarioValidationError as exc:
        raise HTTPException(status_code=422, detail=[v.as_dict() for v in exc.violations])
    except OutputError as exc:
        raise HTTPException(status_code=404, detail=str(exc))


def _yield_uniform(progress: int, status: str, message: str, report: dict | None = None) -> str:
    payload = {
        "progress": int(progress),
        "status": status,
        "message": message,
        "report": json_safe(report) if report is not None else None,
    }
    return json.dumps(payload)


# ---------- SSE generator ---------- #


async def _run_sse_generator(cfg: ScenarioConfig, run_dir: Path, run_id: str):
    """Async generator yielding uniform SSE JSON messages for run progress.

    Payload schema (every message):
    {
      "progress": int,    # 0..100
      "status": str,      # "setting up" | "running" | "completed" | "failed"
      "message": str,
      "report": dict | null   # RunReport on the final message only
    }
    """
    state = reset_progress_state(run_id)
    yield _yield_uniform(0, "setting up", f"Queued {run_id} ({len(STAGES)} stages)")

    def progress(index: int, total: int, stage: str, message: str) -> None:
        set_stage(run_id, index, total, stage, message)

    def work() -> None:
        try:
            report = run_scenario(cfg, run_dir, progress=progress)
            finish(run_id, report=report.model_dump())
        except RModeError as exc:
            finish(run_id, error=str(exc))
        except Exception as exc:  # surfaced to the client, never raised into the event loop
            finish(run_id, error=f"{exc}\n{traceback.format_exc()}")

    async with _run_slots:
        task = asyncio.create_task(asyncio.to_thread(work))
        last = None
        while not task.done():
            snap = state.snapshot()
            key = (snap["progress"], snap["message"])
            if key != last:
                yield _yield_uniform(snap["progress"], snap["status"], snap["message"])
                last = key
            await asyncio.sleep(0.25)
        await task

    if state.error is not None:
        yield _yield_uniform(state.progress, "failed", f"Run {run_id} failed: {state.error}")
        return
    yield _yield_uniform(100, "completed", f"Run {run_id} completed", report=state.report)


# ---------- Endpoints ---------- #


@app.post("/scenario/validate")
async def validate_endpoint(req: ScenarioRequest):
    cfg = _load(req)
    violations = validate_scenario(cfg)
    return {"valid": not violations, "violations": [v.as_dict() for v in violations]}


@app.post("/scenario/run")
async def run_endpoint(req: RunRequest):
    """Streams run progress via Server-Sent Events (SSE)."""
    cfg = _load(req)
    if req.seed_override is not None:
        cfg = cfg.with_seed_override(req.seed_override)
    violations = validate_scenario(cfg)
    if violations:
        raise HTTPException(status_code=422, detail=[v.as_dict() for v in violations])
    run_id = run_id_for(cfg.name)
    run_dir = data_dir(run_id, req.out_dir)
    return EventSourceResponse(_run_sse_generator(cfg, run_dir, run_id))


@app.get("/runs/{run_id}/progress")
async def progress_endpoint(run_id: str):
    state = peek_progress_state(run_id_for(run_id))
    if state is None:
        raise HTTPException(status_code=404, detail=f"No run '{run_id}' in this process")
    return state.snapshot()


@app.get("/runs/{run_id}/report")
async def report_endpoint(run_id: str):
    run_dir = data_dir(run_id)
    try:
        report = load_report(run_dir)
    except OutputError as exc:
        raise HTTPException(status_code=404, detail=f"No report for run '{run_id}': {exc.path.name}")
    return json_safe(report.model_dump())


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("rmode_sim.main:app", host=settings.server_host, port=settings.server_port, reload=False)
