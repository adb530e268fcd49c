import uuid
from typing import Dict, Optional

from fastapi import BackgroundTasks, FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from app.config import Config
from app.models.errors import SQKDError
from app.models.experiment import (
    ExperimentConfig,
    ExperimentJob,
    ExperimentRequest,
    JobStatus,
    VerifyRequest,
    VerifyResponse,
)
from app.services.bounds import closed_forms
from app.services.experiment_runner import ExperimentRunner
from app.services.verification import SCOPES, run_verify
from app.utils.logger import setup_logger


class LabAPI:
    """FastAPI application over the experiment runner, the closed forms and the verify battery"""

    def __init__(self, runner: Optional[ExperimentRunner] = None, max_jobs: Optional[int] = None):
        self.logger = setup_logger(__name__)
        self.app = FastAPI(title="SQKD Lab API", version="1.0.0")
        self.runner = runner or ExperimentRunner(workers=1)
        self.max_jobs = max_jobs or Config.MAX_JOBS
        self.jobs: Dict[str, ExperimentJob] = {}
        self._setup_routes()

    def _setup_routes(self):
        """Setup API routes"""

        @self.app.get("/")
        async def root():
            return {"message": "SQKD Lab API is running"}

        @self.app.get("/health")
        async def health_check():
            """Health check endpoint"""
            try:
                closed_forms(4, 1.0, 0.5, 0.3, 4.0)
                return {"status": "healthy", "jobs": len(self.jobs)}
            except Exception as e:
                self.logger.error(f"Health check failed: {str(e)}")
                return JSONResponse(status_code=503, content={"status": "unhealthy", "error": str(e)})

        @self.app.post("/experiments", response_model=ExperimentJob, status_code=202)
        async def start_experiment(request: ExperimentRequest, background_tasks: BackgroundTasks):
            try:
                cfg = request.to_config()
            except (SQKDError, ValidationError) as e:
                raise HTTPException(status_code=400, detail=str(e))
            if not self._make_room():
                raise HTTPException(status_code=429, detail=f"{self.max_jobs} experiments are still pending")
            job = ExperimentJob(experiment_id=uuid.uuid4().hex, status=JobStatus.queued)
            self.jobs[job.experiment_id] = job
            background_tasks.add_task(self._run_experiment, job.experiment_id, cfg)
            return job

        @self.app.get("/experiments/{experiment_id}", response_model=ExperimentJob)
        async def get_experiment(experiment_id: str):
            job = self.jobs.get(experiment_id)
            if job is None:
                raise HTTPException(status_code=404, detail=f"Unknown experiment {experiment_id}")
            return job

        @self.app.get("/bounds")
        async def bounds(n: int = Query(40, ge=1), epsilon: float = Query(0.5, ge=0.0, le=1.0),
                         delta: float = Query(0.5, gt=0.0), delta_prime: float = Query(0.3, gt=0.0),
                         k: float = Query(4.0, gt=0.0)):
            return {
                "parameters": {"n": n, "epsilon": epsilon, "delta": delta, "delta_prime": delta_prime, "k": k},
                "values": closed_forms(n, epsilon, delta, delta_prime, k),
            }

        @self.app.post("/verify", response_model=VerifyResponse)
        async def verify(request: VerifyRequest):
            scope = request.scope.strip().lower()
            if scope not in SCOPES and scope != "all":
                raise HTTPException(status_code=400, detail=f"scope must be one of {list(SCOPES) + ['all']}")
            try:
                code, reports = run_verify(scope)
            except SQKDError as e:
                raise HTTPException(status_code=400, detail=str(e))
            except Exception as e:
                self.logger.error(f"Verification error for scope='{scope}': {str(e)}")
                raise HTTPException(status_code=500, detail="Verification failed")
            return VerifyResponse(
                scope=scope,
                exit_code=code,
                passed=sum(r.satisfied and not r.skipped for r in reports),
                failed=sum(not r.satisfied for r in reports),
                skipped=sum(r.skipped for r in reports),
                reports=[r.to_dict() for r in reports],
            )

    def _make_room(self) -> bool:
        """Evict the oldest finished jobs until one more fits; False if only pending jobs remain"""
        finished = [key for key, job in self.jobs.items()
                    if job.status in (JobStatus.completed, JobStatus.failed)]
        while len(self.jobs) >= self.max_jobs and finished:
            evicted = finished.pop(0)
            del self.jobs[evicted]
            self.logger.debug(f"Evicted finished experiment {evicted}")
        return len(self.jobs) < self.max_jobs

    def _run_experiment(self, experiment_id: str, cfg: ExperimentConfig):
        job = self.jobs[experiment_id]
        job.status = JobStatus.running
        try:
            job.summary = self.runner.run_experiment(cfg)
            job.status = JobStatus.completed
        except Exception as e:
            self.logger.error(f"Experiment {experiment_id} failed: {str(e)}")
            job.status = JobStatus.failed
            job.error = str(e)

    def get_app(self):
        return self.app
