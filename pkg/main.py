# main.py

import datetime
import os
import threading
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Dict

from dotenv import load_dotenv
from fastapi import BackgroundTasks, FastAPI, HTTPException, Request, status
from fastapi.middleware.cors import CORSMiddleware

from exciton_pimc.config import parse_config
from exciton_pimc.errors import ConfigError
from exciton_pimc.logger import get_logger, log_error, log_info, log_success
from exciton_pimc.models.config_models import RunConfig
from exciton_pimc.models.service_models import (
    DeleteResponse,
    ListRunsResponse,
    RunInfo,
    RunRequest,
    RunStatusResponse,
    RunSubmitResponse,
)
from exciton_pimc.runner import run_experiment

load_dotenv()
logger = get_logger("ExcitonPimcAPI")


class JobRegistry:
    """In-process run registry; entries are RunStatusResponse records."""

    def __init__(self):
        self._jobs: Dict[str, RunStatusResponse] = {}
        self._lock = threading.Lock()

    def add(self, job: RunStatusResponse):
        with self._lock:
            self._jobs[job.run_id] = job

    def get(self, run_id: str):
        with self._lock:
            return self._jobs.get(run_id)

    def update(self, run_id: str, **fields):
        with self._lock:
            self._jobs[run_id] = self._jobs[run_id].model_copy(update=fields)

    def all(self):
        with self._lock:
            return list(self._jobs.values())

    def clear_finished(self) -> int:
        with self._lock:
            done = [k for k, j in self._jobs.items() if j.status in ("COMPLETED", "FAILED")]
            for k in done:
                del self._jobs[k]
            return len(done)


@asynccontextmanager
async def lifespan(app: FastAPI):
    log_info(logger, "--- Initializing run registry ---")
    app.state.jobs = JobRegistry()
    app.state.output_root = Path(os.getenv("PIMC_SERVICE_OUTPUT_DIR", "service_runs"))
    yield
    log_info(logger, "--- Application Shutting Down ---")


app = FastAPI(
    title="Exciton PIMC API",
    description="Submit path-integral Monte Carlo runs and poll for their summaries.",
    version="1.0.0",
    lifespan=lifespan,
)
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def run_in_background(jobs: JobRegistry, run_id: str, config: RunConfig, output_dir: Path):
    log_info(logger, f"BACKGROUND: Starting run {run_id}")
    jobs.update(run_id, status="RUNNING")
    try:
        summary = run_experiment(config, output_dir)
        jobs.update(run_id, status="COMPLETED", result=summary)
        log_success(logger, f"BACKGROUND [{run_id}]: Run completed.")
    except Exception as e:
        log_error(logger, f"BACKGROUND [{run_id}]: Run failed. Error: {e}", exc_info=True)
        jobs.update(run_id, status="FAILED", error_message=str(e))


@app.post("/runs", response_model=RunSubmitResponse, status_code=status.HTTP_202_ACCEPTED)
async def submit_run(request: Request, payload: RunRequest, background_tasks: BackgroundTasks):
    try:
        config = parse_config(payload.config)
    except ConfigError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    if config.is_sweep:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="sweeps are not accepted by the service; submit one run per point",
        )
    run_id = uuid.uuid4().hex
    output_dir = request.app.state.output_root / run_id
    jobs: JobRegistry = request.app.state.jobs
    jobs.add(
        RunStatusResponse(
            run_id=run_id,
            status="QUEUED",
            created=datetime.datetime.now(datetime.timezone.utc),
            output_dir=str(output_dir),
        )
    )
    log_info(logger, f"API: Run accepted as '{run_id}'")
    background_tasks.add_task(run_in_background, jobs, run_id, config, output_dir)
    return RunSubmitResponse(
        message="Run accepted. Poll the status endpoint for results.",
        run_id=run_id,
        status_endpoint=f"/runs/{run_id}",
    )


@app.get("/runs/{run_id}", response_model=RunStatusResponse)
async def get_run(request: Request, run_id: str):
    job = request.app.state.jobs.get(run_id)
    if job is None:
        raise HTTPException(status_code=404, detail="Run not found.")
    log_info(logger, f"API: Status check for run '{run_id}': {job.status}")
    return job


@app.get("/runs", response_model=ListRunsResponse, summary="List All Runs")
async def list_runs(request: Request):
    return ListRunsResponse(
        runs=[RunInfo(id=j.run_id, status=j.status, created=j.created) for j in request.app.state.jobs.all()]
    )


@app.delete("/runs", response_model=DeleteResponse, summary="Delete Finished Runs")
async def delete_finished_runs(request: Request):
    deleted = request.app.state.jobs.clear_finished()
    log_info(logger, f"API: Deleted {deleted} finished runs")
    return DeleteResponse(message=f"Deleted {deleted} finished runs.", deleted_count=deleted)
