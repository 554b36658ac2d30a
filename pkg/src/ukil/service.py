"""HTTP API for the legal assistant.

Endpoints:
  POST /v1/ask     {question, params?} -> {answer, truncated, latency_ms,
                                           model, disclaimer}
  GET  /v1/health  -> {status, model_fingerprint} (503 while loading)
  GET  /v1/cases   -> the bundled demonstration cases

Malformed JSON bodies return 400; requests that parse but violate a
precondition (empty question, unknown strategy) return 422. Every answer
carries a standing not-legal-advice disclaimer. Generation runs through a
lock so a single model handle is never driven concurrently.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .generation import Answerer, GenerationParams, PromptTooLong, Transcript

DISCLAIMER = ("This tool is an early-stage research assistant and its answers "
              "are not legal advice.")


class BindError(RuntimeError):
    """Service could not bind its port."""


@dataclass
class CaseStudy:
    case_id: int
    difficulty: str  # easy | medium | hard
    narrative: str
    question: str

    def full_prompt(self) -> str:
        return f"{self.narrative}\n{self.question}"

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "difficulty": self.difficulty,
            "narrative": self.narrative,
            "question": self.question,
        }


def load_cases(path: str | Path | None = None) -> list[CaseStudy]:
    if path is None:
        text = (resources.files("ukil.data") / "cases.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    cases = [CaseStudy(**d) for d in json.loads(text)]
    seen = set()
    for case in cases:
        if case.case_id in seen:
            raise ValueError(f"duplicate case_id {case.case_id}")
        seen.add(case.case_id)
    return cases


def run_cases(handle: Answerer, cases: Sequence[CaseStudy],
              out_dir: str | Path | None = None,
              params: GenerationParams | None = None) -> list[Transcript]:
    """Answer every bundled case with default (greedy) parameters and persist
    the transcripts for expert review."""
    if not cases:
        raise ValueError("case list is empty")
    transcripts = []
    for case in cases:
        transcript = handle.answer(case.full_prompt(), params, case_id=case.case_id)
        transcripts.append(transcript)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for t in transcripts:
            (out / f"case-{t.case_id}.json").write_text(
                json.dumps(t.to_dict(), ensure_ascii=False, indent=2),
                encoding="utf-8")
    return transcripts


# ---------------------------------------------------------------------------
# FastAPI app
# ---------------------------------------------------------------------------

class ParamsModel(BaseModel):
    strategy: str = "greedy"
    max_new_tokens: int | None = Field(default=None, ge=1)
    temperature: float = Field(default=1.0, gt=0)
    seed: int = 42


class AskRequest(BaseModel):
    question: str = Field(min_length=1)
    params: ParamsModel | None = None


def create_app(handle: Answerer | None = None,
               cases_path: str | Path | None = None,
               loader: Callable[[], Answerer] | None = None) -> FastAPI:
    """Build the service app.

    Pass ``handle`` for a ready model, or ``loader`` to load one on a
    background thread after startup; until loading finishes the API answers
    503.
    """
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def _lifespan(app_: FastAPI):
        if loader is not None:
            def _load():
                app_.state.handle = loader()
            threading.Thread(target=_load, daemon=True).start()
        yield

    app = FastAPI(title="ukil legal assistant", version="0.1.0",
                  lifespan=_lifespan)
    # the browser client is served from its own origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    app.state.handle = handle
    app.state.cases = load_cases(cases_path)
    app.state.generation_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        # Undecodable bodies are transport-level errors (400); everything
        # that parsed but violates the schema is a precondition error (422).
        for error in exc.errors():
            if error.get("type") in ("json_invalid", "model_attributes_type"):
                return JSONResponse(status_code=400,
                                    content={"detail": "malformed JSON body"})
        return JSONResponse(status_code=422, content={"detail": exc.errors()})

    @app.get("/v1/health")
    def health():
        if app.state.handle is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok",
                "model_fingerprint": app.state.handle.fingerprint}

    @app.get("/v1/cases")
    def cases():
        return [c.to_dict() for c in app.state.cases]

    @app.post("/v1/ask")
    def ask(request: AskRequest):
        if app.state.handle is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        question = request.question.strip()
        if not question:
            return JSONResponse(status_code=422,
                                content={"detail": "question is empty"})
        try:
            params = GenerationParams(**request.params.model_dump()) \
                if request.params else GenerationParams()
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        try:
            with app.state.generation_lock:
                transcript = app.state.handle.answer(question, params)
        except PromptTooLong as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        return {
            "answer": transcript.answer,
            "truncated": transcript.truncated,
            "latency_ms": transcript.latency_ms,
            "model": transcript.model_fingerprint,
            "disclaimer": DISCLAIMER,
        }

    return app


def serve(handle_loader: Callable[[], Answerer], host: str = "127.0.0.1",
          port: int = 8080, cases_path: str | Path | None = None) -> None:
    """Run the API with uvicorn; the model loads on a background thread."""
    import uvicorn

    app = create_app(loader=handle_loader, cases_path=cases_path)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
