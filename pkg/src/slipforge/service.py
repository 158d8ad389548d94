"""HTTP review service: browse fragments, rank candidates, record verdicts.

Thin JSON layer over the evaluation and datastore modules.  Every error
body has the same shape, ``{"error": {"code": ..., "message": ...}}``, with
stable codes: ``malformed`` (400), ``unknown-id`` (404), ``group-violation``
(409) and ``internal`` (500).
"""

from __future__ import annotations

import os
from datetime import datetime, timezone
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .datastore import (
    DatasetManifest,
    Fragment,
    MatchRecord,
    VERDICTS,
    append_match,
    list_matches,
)
from .evaluation import Scorer, make_scorer, rank_candidates
from .matcher import EmbeddingModel

DEFAULT_K = 50
MAX_K = 500

_METHODS = ("wisepanda", "dtw", "cosine")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
    )


class MatchSubmission(BaseModel):
    target_id: str
    candidate_id: str
    verdict: str
    note: str = ""
    method: str = ""
    rank: int | None = None
    confidence: float | None = None


def _fragment_summary(frag: Fragment, dataset: DatasetManifest) -> dict:
    return {
        "id": frag.id,
        "group": frag.group,
        "n_fibers": len(frag.heights),
        "paired": dataset.is_paired(frag.id),
    }


def _fragment_detail(frag: Fragment, dataset: DatasetManifest) -> dict:
    doc = _fragment_summary(frag, dataset)
    doc["heights"] = list(frag.heights)
    doc["true_match"] = dataset.true_match(frag.id)
    return doc


_PLACEHOLDER = """<!doctype html>
<html><head><title>slipforge</title></head>
<body><h1>slipforge review service</h1>
<p>No review UI is built.  The JSON API lives under <code>/api/</code>.</p>
</body></html>"""


def create_app(
    dataset: DatasetManifest,
    model: EmbeddingModel,
    ledger_path: str,
    ui_dir: str | None = None,
) -> FastAPI:
    """Wire the API around one dataset, one model and one ledger file."""
    app = FastAPI(title="slipforge review service", version=__version__)

    scorers: dict[str, Scorer] = {
        name: make_scorer(name, model=model) for name in _METHODS
    }

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return _error_response(400, "malformed", str(exc.errors()[:3]))

    @app.exception_handler(Exception)
    async def handle_internal(request: Request, exc: Exception):
        return _error_response(500, "internal", f"{type(exc).__name__}: {exc}")

    def get_fragment(fragment_id: str) -> Fragment:
        if not dataset.has_fragment(fragment_id):
            raise ApiError(404, "unknown-id", f"no fragment {fragment_id!r}")
        return dataset.fragment(fragment_id)

    @app.get("/api/health")
    async def health():
        return {
            "status": "ok",
            "version": __version__,
            "dataset": dataset.name,
            "n_fragments": len(dataset.fragments),
            "n_pairs": dataset.n_pairs,
        }

    @app.get("/api/fragments")
    async def fragments(group: str | None = None):
        if group is not None and group not in ("upper", "lower"):
            raise ApiError(400, "malformed", f"unknown group {group!r}")
        frags = [f for f in dataset.fragments if group is None or f.group == group]
        frags.sort(key=lambda f: f.id)
        return {
            "dataset": dataset.name,
            "fragments": [_fragment_summary(f, dataset) for f in frags],
        }

    @app.get("/api/fragments/{fragment_id}")
    async def fragment_detail(fragment_id: str):
        return _fragment_detail(get_fragment(fragment_id), dataset)

    @app.get("/api/fragments/{fragment_id}/candidates")
    async def candidates(fragment_id: str, k: int = DEFAULT_K, method: str = "wisepanda"):
        if method not in scorers:
            raise ApiError(400, "malformed", f"unknown method {method!r}")
        if k < 1 or k > MAX_K:
            raise ApiError(400, "malformed", f"k must lie in 1..{MAX_K}")
        target = get_fragment(fragment_id)
        pool = [
            f for f in dataset.candidate_pool(target.group) if f.id != target.id
        ]
        ranked = rank_candidates(
            target, pool, scorers[method], true_id=dataset.true_match(target.id)
        )
        return {
            "target_id": target.id,
            "method": method,
            "k": k,
            "pool_size": len(pool),
            "rank_of_truth": ranked.rank_of_truth,
            "candidates": [
                {
                    "rank": i + 1,
                    "candidate_id": e.candidate_id,
                    "score": e.score,
                    "is_true_match": e.candidate_id == dataset.true_match(target.id),
                }
                for i, e in enumerate(ranked.top(k))
            ],
        }

    @app.post("/api/matches")
    async def submit_match(body: MatchSubmission):
        if body.verdict not in VERDICTS:
            raise ApiError(400, "malformed", f"verdict must be one of {list(VERDICTS)}")
        target = get_fragment(body.target_id)
        candidate = get_fragment(body.candidate_id)
        if target.id == candidate.id:
            raise ApiError(409, "group-violation", "a fragment cannot match itself")
        if (
            target.group == candidate.group
            and dataset.is_paired(target.id)
            and dataset.is_paired(candidate.id)
        ):
            raise ApiError(
                409,
                "group-violation",
                f"both fragments sit on the {target.group} side",
            )
        record = MatchRecord(
            target_id=body.target_id,
            candidate_id=body.candidate_id,
            verdict=body.verdict,
            note=body.note,
            method=body.method,
            rank=body.rank,
            confidence=body.confidence,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        record_id = append_match(ledger_path, record)
        return {**record.to_dict(), "record_id": record_id}

    @app.get("/api/matches")
    async def matches(target_id: str | None = None):
        records = list_matches(ledger_path, target_id=target_id)
        return {"matches": [r.to_dict() for r in records]}

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        async def index():
            return _PLACEHOLDER

    return app


def serve(
    dataset: DatasetManifest,
    model: EmbeddingModel,
    ledger_path: str,
    addr: str = "127.0.0.1:8000",
    ui_dir: str | None = None,
) -> None:
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"addr must look like host:port, got {addr!r}")
    app = create_app(dataset, model, ledger_path, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
