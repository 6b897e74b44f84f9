"""Deterministic dispatcher that runs fold jobs and reduces them in fold order."""

from concurrent.futures import Future, ThreadPoolExecutor
from typing import Callable, Dict, Generic, List, Literal, Optional, TypeVar

from pydantic import BaseModel, Field

from ..logs import get_logger

_LOGGER = get_logger(__name__)

JobStatus = Literal["pending", "running", "completed", "failed"]
ResultT = TypeVar("ResultT")


class FoldJob(BaseModel):
	"""One unit of work the harness schedules: every stage of a single fold."""

	fold: int = Field(..., ge=0, description="Fold index; results are reduced in this order.")
	status: JobStatus = Field("pending", description="Execution lifecycle status.")
	error: Optional[str] = Field(None, description="Exception text when the job failed.")


class FoldDispatcher(Generic[ResultT]):
	"""Pure code routing: the worker count changes wall time, never the outputs."""

	def __init__(self, worker: Callable[[int], ResultT], *, workers: int = 1):
		self._worker = worker
		self._workers = max(1, workers)

	def run(self, jobs: List[FoldJob]) -> Dict[int, Optional[ResultT]]:
		if not jobs:
			_LOGGER.warning("No fold jobs were planned; nothing to run.")
			return {}

		if self._workers == 1:
			results = {job.fold: self._execute(job) for job in jobs}
		else:
			with ThreadPoolExecutor(max_workers=min(self._workers, len(jobs))) as pool:
				futures: Dict[int, Future] = {job.fold: pool.submit(self._execute, job) for job in jobs}
				results = {fold: futures[fold].result() for fold in sorted(futures)}

		return self._finalize(jobs, results)

	def _execute(self, job: FoldJob) -> Optional[ResultT]:
		job.status = "running"
		try:
			result = self._worker(job.fold)
		except Exception as exc:  # noqa: BLE001 - a failed fold must not stop the run
			job.status = "failed"
			job.error = f"{exc.__class__.__name__}: {exc}"
			_LOGGER.error("fold %d failed: %s", job.fold, job.error)
			return None
		job.status = "completed"
		return result

	def _finalize(self, jobs: List[FoldJob], results: Dict[int, Optional[ResultT]]) -> Dict[int, Optional[ResultT]]:
		ordered: Dict[int, Optional[ResultT]] = {}
		for job in sorted(jobs, key=lambda item: item.fold):
			match job.status:
				case "completed":
					ordered[job.fold] = results[job.fold]
				case "failed":
					ordered[job.fold] = None
				case _:
					_LOGGER.error("fold %d ended in unexpected status '%s'", job.fold, job.status)
					ordered[job.fold] = None
		return ordered
