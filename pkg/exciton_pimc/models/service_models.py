# exciton_pimc/models/service_models.py

import datetime
from typing import List, Literal, Optional

from pydantic import BaseModel, Field

from exciton_pimc.models.summary_models import RunSummary

JobStatus = Literal["QUEUED", "RUNNING", "COMPLETED", "FAILED"]


class RunRequest(BaseModel):
    config: str = Field(..., description="TOML run configuration text.")


class RunSubmitResponse(BaseModel):
    message: str
    run_id: str
    status_endpoint: str


class RunStatusResponse(BaseModel):
    run_id: str
    status: JobStatus
    created: datetime.datetime
    output_dir: str
    error_message: Optional[str] = None
    result: Optional[RunSummary] = None


class RunInfo(BaseModel):
    id: str
    status: JobStatus
    created: datetime.datetime


class ListRunsResponse(BaseModel):
    runs: List[RunInfo]


class DeleteResponse(BaseModel):
    message: str
    deleted_count: int
