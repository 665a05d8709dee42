"""HTTP service backing the expert-annotation workflow.

Annotators work through two 10-item practice rounds before seeing main
tasks, judge pairwise comparisons (feedback A vs B, or two revised essays)
and 1-5 Likert ratings, and the service computes agreement and
machine-alignment reports on demand. State is an append-only JSONL event
log plus an in-memory index; replaying the log reconstructs the service
exactly.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from fastapi import Body, FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import JSONResponse

from .errors import DomainError, UndefinedAgreementError
from .metrics import (
    PairwiseJudgment,
    Winner,
    fleiss_kappa,
    icc,
    pairwise_alignment,
)

__all__ = [
    "TaskKind",
    "AnnotationTask",
    "Judgment",
    "AnnotationStore",
    "create_app",
    "PRACTICE_ROUNDS",
    "PRACTICE_PER_ROUND",
]

PRACTICE_ROUNDS = 2
PRACTICE_PER_ROUND = 10

LIKERT_SCALES = ("d1", "d2", "d3")  # faithfulness / usefulness / rubric alignment


class TaskKind(str, Enum):
    PAIRWISE = "pairwise"
    LIKERT = "likert"
    REVISION_PAIRWISE = "revision_pairwise"


@dataclass(frozen=True)
class AnnotationTask:
    """One unit of annotator work.

    ``items`` holds the two texts in their original order for the pairwise
    kinds; ``swapped`` records the A/B permutation applied when the task was
    created, so stored judgments can be de-randomized. ``machine_winner`` is
    the original-order index (0 or 1) preferred by the automatic evaluator,
    kept server-side for alignment reports.
    """

    task_id: str
    kind: TaskKind
    dimension: str = ""
    context: str = ""
    excerpt: str = ""
    items: tuple[str, ...] = ()
    feedback: str = ""  # likert tasks rate a single feedback text
    swapped: bool = False
    is_practice: bool = False
    practice_round: int = 0
    machine_winner: int | None = None

    def __post_init__(self) -> None:
        if self.kind is TaskKind.LIKERT:
            if not self.feedback:
                raise DomainError(f"likert task {self.task_id} needs feedback text")
        else:
            if len(self.items) != 2:
                raise DomainError(
                    f"{self.kind.value} task {self.task_id} needs exactly two items"
                )
        if self.is_practice and self.practice_round not in (1, 2):
            raise DomainError("practice tasks carry round 1 or 2")
        if self.machine_winner is not None and self.machine_winner not in (0, 1):
            raise DomainError("machine_winner must be 0 or 1")

    def served_view(self) -> dict[str, Any]:
        """Task payload as shown to annotators: permuted, winner withheld."""
        view: dict[str, Any] = {
            "task_id": self.task_id,
            "kind": self.kind.value,
            "dimension": self.dimension,
            "context": self.context,
            "excerpt": self.excerpt,
            "is_practice": self.is_practice,
            "practice_round": self.practice_round,
        }
        if self.kind is TaskKind.LIKERT:
            view["feedback"] = self.feedback
            view["scales"] = list(LIKERT_SCALES)
        else:
            a, b = (1, 0) if self.swapped else (0, 1)
            view["a"] = self.items[a]
            view["b"] = self.items[b]
        return view

    def original_index(self, position: str) -> int:
        """Map a served position ('A'/'B') back to the original item index."""
        if position not in ("A", "B"):
            raise DomainError(f"position must be 'A' or 'B', got {position!r}")
        first = 1 if self.swapped else 0
        return first if position == "A" else 1 - first


@dataclass(frozen=True)
class Judgment:
    task_id: str
    annotator_id: str
    winner: str | None = None  # pairwise kinds
    ratings: tuple[int, ...] = ()  # likert: (d1, d2, d3)
    session_id: str = ""
    timestamp: float = 0.0

    def answer_key(self) -> tuple:
        return (self.winner, self.ratings)


class AnnotationStore:
    """Durable annotation state.

    Every mutation appends one event line (fsynced) before acknowledging;
    ``replay`` rebuilds identical in-memory state from the log. Writers are
    serialized through a lock; readers see complete states only.
    """

    def __init__(self, log_path: str | Path | None = None, seed: int = 0):
        self.log_path = Path(log_path) if log_path else None
        self.seed = seed
        self._lock = threading.Lock()
        self._sequence = 0
        self.annotators: set[str] = set()
        self.tasks: dict[str, AnnotationTask] = {}
        self._task_order: list[str] = []
        self.served: dict[str, set[str]] = {}
        self.judgments: dict[tuple[str, str], Judgment] = {}
        if self.log_path is not None and self.log_path.exists():
            self.replay()

    # -- event log ---------------------------------------------------------

    def _append(self, event: Mapping[str, Any]) -> None:
        if self.log_path is None:
            return
        line = json.dumps(event, ensure_ascii=False, separators=(",", ":"))
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            import os

            os.fsync(fh.fileno())

    def replay(self) -> None:
        assert self.log_path is not None
        self.annotators.clear()
        self.tasks.clear()
        self._task_order.clear()
        self.served.clear()
        self.judgments.clear()
        self._sequence = 0
        with self.log_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                self._apply(event)

    def _apply(self, event: Mapping[str, Any]) -> None:
        kind = event["event"]
        if kind == "annotator":
            self.annotators.add(event["annotator_id"])
        elif kind == "task":
            data = dict(event)
            data.pop("event")
            data["kind"] = TaskKind(data["kind"])
            data["items"] = tuple(data.get("items") or ())
            task = AnnotationTask(**data)
            self.tasks[task.task_id] = task
            self._task_order.append(task.task_id)
        elif kind == "served":
            self.served.setdefault(event["annotator_id"], set()).add(event["task_id"])
        elif kind == "judgment":
            judgment = Judgment(
                task_id=event["task_id"],
                annotator_id=event["annotator_id"],
                winner=event.get("winner"),
                ratings=tuple(event.get("ratings") or ()),
                session_id=event.get("session_id", ""),
                timestamp=event.get("timestamp", 0.0),
            )
            self.judgments[(judgment.task_id, judgment.annotator_id)] = judgment
            self._sequence = max(self._sequence, event.get("sequence", 0))

    # -- registration and tasks --------------------------------------------

    def register_annotator(self, annotator_id: str) -> bool:
        if not annotator_id.strip():
            raise DomainError("annotator id must be non-empty")
        with self._lock:
            if annotator_id in self.annotators:
                return False
            self.annotators.add(annotator_id)
            self._append({"event": "annotator", "annotator_id": annotator_id})
            return True

    def add_task(self, task: AnnotationTask) -> None:
        with self._lock:
            if task.task_id in self.tasks:
                raise DomainError(f"duplicate task id {task.task_id!r}")
            self.tasks[task.task_id] = task
            self._task_order.append(task.task_id)
            record = asdict(task)
            record["kind"] = task.kind.value
            record["items"] = list(task.items)
            self._append({"event": "task", **record})

    def load_task_definitions(self, definitions: list[Mapping[str, Any]]) -> int:
        """Create tasks from plain definitions, randomizing pairwise A/B order.

        A definition carries the original-order items; the permutation is
        drawn from the store seed and recorded on the task.
        """
        rng = random.Random(self.seed)
        created = 0
        for definition in definitions:
            data = dict(definition)
            kind = TaskKind(data.get("kind", "pairwise"))
            swapped = bool(rng.getrandbits(1)) if kind is not TaskKind.LIKERT else False
            task = AnnotationTask(
                task_id=str(data["task_id"]),
                kind=kind,
                dimension=str(data.get("dimension", "")),
                context=str(data.get("context", "")),
                excerpt=str(data.get("excerpt", "")),
                items=tuple(data.get("items") or ()),
                feedback=str(data.get("feedback", "")),
                swapped=swapped,
                is_practice=bool(data.get("is_practice", False)),
                practice_round=int(data.get("practice_round", 0)),
                machine_winner=data.get("machine_winner"),
            )
            self.add_task(task)
            created += 1
        return created

    # -- queue --------------------------------------------------------------

    def _practice_ids(self) -> list[str]:
        return [t for t in self._task_order if self.tasks[t].is_practice]

    def _main_ids(self) -> list[str]:
        return [t for t in self._task_order if not self.tasks[t].is_practice]

    def practice_complete(self, annotator_id: str) -> bool:
        practice = self._practice_ids()
        return all((t, annotator_id) in self.judgments for t in practice)

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        """Next unjudged task: practice first (fixed order, both rounds),
        then main tasks in a per-annotator randomized order."""
        if annotator_id not in self.annotators:
            raise DomainError(f"unknown annotator {annotator_id!r}")
        with self._lock:
            queue = [
                t
                for t in self._practice_ids()
                if (t, annotator_id) not in self.judgments
            ]
            if not queue:
                main = self._main_ids()
                order = random.Random(f"{self.seed}:{annotator_id}")
                shuffled = list(main)
                order.shuffle(shuffled)
                queue = [t for t in shuffled if (t, annotator_id) not in self.judgments]
            if not queue:
                return None
            task = self.tasks[queue[0]]
            already = self.served.setdefault(annotator_id, set())
            if task.task_id not in already:
                already.add(task.task_id)
                self._append(
                    {
                        "event": "served",
                        "annotator_id": annotator_id,
                        "task_id": task.task_id,
                    }
                )
            return task

    # -- judgments -----------------------------------------------------------

    def _validate_answer(self, task: AnnotationTask, judgment: Judgment) -> None:
        if task.kind is TaskKind.LIKERT:
            if judgment.winner is not None or len(judgment.ratings) != len(
                LIKERT_SCALES
            ):
                raise DomainError(
                    f"likert judgments need {len(LIKERT_SCALES)} ratings"
                )
            for value in judgment.ratings:
                if not 1 <= value <= 5:
                    raise DomainError(f"likert rating {value} outside [1, 5]")
        else:
            if judgment.ratings or judgment.winner not in ("A", "B"):
                raise DomainError("pairwise judgments need winner 'A' or 'B'")

    def submit(self, judgment: Judgment) -> tuple[int, bool]:
        """Persist a judgment. Returns (sequence, created).

        Exact duplicates acknowledge idempotently; a resubmission with a
        different answer is a conflict because judgments are immutable.
        """
        task = self.tasks.get(judgment.task_id)
        if task is None:
            raise KeyError(judgment.task_id)
        if judgment.annotator_id not in self.annotators:
            raise DomainError(f"unknown annotator {judgment.annotator_id!r}")
        if judgment.task_id not in self.served.get(judgment.annotator_id, set()):
            raise PermissionError(
                f"task {judgment.task_id!r} was never served to "
                f"{judgment.annotator_id!r}"
            )
        self._validate_answer(task, judgment)
        with self._lock:
            key = (judgment.task_id, judgment.annotator_id)
            existing = self.judgments.get(key)
            if existing is not None:
                if existing.answer_key() == judgment.answer_key():
                    return self._sequence, False
                raise ValueError(
                    f"conflicting resubmission for task {judgment.task_id!r}"
                )
            self._sequence += 1
            self.judgments[key] = judgment
            self._append(
                {
                    "event": "judgment",
                    "sequence": self._sequence,
                    "task_id": judgment.task_id,
                    "annotator_id": judgment.annotator_id,
                    "winner": judgment.winner,
                    "ratings": list(judgment.ratings),
                    "session_id": judgment.session_id,
                    "timestamp": judgment.timestamp or time.time(),
                }
            )
            return self._sequence, True

    # -- reports --------------------------------------------------------------

    def _complete_subset(
        self, task_ids: list[str]
    ) -> list[tuple[str, str]]:
        missing = []
        for task_id in task_ids:
            for annotator_id in sorted(self.annotators):
                if (task_id, annotator_id) not in self.judgments:
                    missing.append((task_id, annotator_id))
        return missing

    def agreement_report(
        self,
        dimension: str = "",
        kind: TaskKind = TaskKind.PAIRWISE,
        task_ids: list[str] | None = None,
    ) -> dict[str, Any]:
        """Agreement within annotators plus alignment against the machine winner.

        Pairwise kinds report Fleiss' kappa over de-randomized winners and
        majority-vs-machine alignment; Likert tasks report ICC per scale.
        Every task in the subset must be judged by every registered
        annotator, and majority voting needs an odd annotator count.
        """
        annotators = sorted(self.annotators)
        if not annotators:
            raise DomainError("no annotators registered")
        if task_ids is None:
            task_ids = [
                t
                for t in self._main_ids()
                if self.tasks[t].kind is kind
                and (not dimension or self.tasks[t].dimension == dimension)
            ]
        if not task_ids:
            raise DomainError("no tasks match the requested subset")
        missing = self._complete_subset(task_ids)
        if missing:
            raise LookupError(json.dumps({"missing": missing}))

        report: dict[str, Any] = {
            "kind": kind.value,
            "dimension": dimension,
            "tasks": len(task_ids),
            "annotators": len(annotators),
        }
        if kind is TaskKind.LIKERT:
            report["icc"] = {}
            for scale_index, scale in enumerate(LIKERT_SCALES):
                matrix = [
                    [
                        self.judgments[(t, a)].ratings[scale_index]
                        for a in annotators
                    ]
                    for t in task_ids
                ]
                report["icc"][scale] = icc(matrix)
            return report

        if len(annotators) % 2 == 0:
            raise DomainError(
                "majority voting needs an odd annotator count, got "
                f"{len(annotators)}"
            )
        counts = []
        alignment = []
        for task_id in task_ids:
            task = self.tasks[task_id]
            votes = [0, 0]
            for annotator_id in annotators:
                winner = self.judgments[(task_id, annotator_id)].winner
                votes[task.original_index(winner or "A")] += 1
            counts.append(votes)
            if task.machine_winner is not None:
                majority = 0 if votes[0] > votes[1] else 1
                alignment.append(
                    PairwiseJudgment(
                        item_id=task_id,
                        gold_winner=Winner.A if majority == 0 else Winner.B,
                        predicted_winner=(
                            Winner.A if task.machine_winner == 0 else Winner.B
                        ),
                        dimension=task.dimension,
                    )
                )
        report["fleiss_kappa"] = fleiss_kappa(counts, len(annotators))
        if alignment:
            scores = pairwise_alignment(alignment)
            report["alignment"] = {
                "accuracy": scores.accuracy,
                "f1": scores.f1,
                "f1_macro": scores.f1_macro,
            }
        return report


def create_app(
    store: AnnotationStore,
    static_dir: str | Path | None = None,
    token: str | None = None,
):
    """Build the FastAPI application around a store.

    When ``token`` is set, every API call must carry it in the
    ``X-Auth-Token`` header (a single shared secret; there is no per-user
    auth). ``static_dir`` is mounted at ``/app`` for the companion UI.
    """
    app = FastAPI(title="feedeval annotation service")
    app.state.store = store

    def check_token(request: Request) -> None:
        if token is not None and request.headers.get("X-Auth-Token") != token:
            raise HTTPException(status_code=401, detail="missing or wrong token")

    @app.post("/annotators", status_code=201)
    def register(request: Request, body: dict = Body(...)):
        check_token(request)
        annotator_id = str(body.get("annotator_id", "")).strip()
        try:
            created = store.register_annotator(annotator_id)
        except DomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"annotator_id": annotator_id, "created": created}

    @app.get("/tasks/next")
    def next_task(request: Request, annotator: str = Query(...)):
        check_token(request)
        try:
            task = store.next_task(annotator)
        except DomainError as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        if task is None:
            return Response(status_code=204)
        return task.served_view()

    @app.get("/tasks/{task_id}")
    def get_task(request: Request, task_id: str):
        check_token(request)
        task = store.tasks.get(task_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"no task {task_id!r}")
        return task.served_view()

    @app.post("/judgments")
    def submit(request: Request, body: dict = Body(...)):
        check_token(request)
        judgment = Judgment(
            task_id=str(body.get("task_id", "")),
            annotator_id=str(body.get("annotator_id", "")),
            winner=body.get("winner"),
            ratings=tuple(body.get("ratings") or ()),
            session_id=str(body.get("session_id", "")),
            timestamp=time.time(),
        )
        try:
            sequence, created = store.submit(judgment)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown task")
        except PermissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except DomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"sequence": sequence, "duplicate": not created}

    @app.get("/reports/agreement")
    def agreement(
        request: Request,
        dimension: str = Query(""),
        kind: str = Query("pairwise"),
    ):
        check_token(request)
        try:
            report = store.agreement_report(dimension, TaskKind(kind))
        except LookupError as exc:
            return JSONResponse(status_code=409, content=json.loads(str(exc)))
        except (DomainError, UndefinedAgreementError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return report

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(static_dir), html=True), name="app")

    return app
