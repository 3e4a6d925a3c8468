"""FastAPI application wrapping the service handlers."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import CoclabError
from . import handlers
from . import models as m


def create_app() -> FastAPI:
    app = FastAPI(title="coclab", version="0.1.0")

    @app.exception_handler(CoclabError)
    async def _domain_error(request: Request, exc: CoclabError):
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": "0.1.0"}

    @app.post("/estimate", response_model=m.EstimateResponse)
    def estimate(req: m.EstimateRequest) -> m.EstimateResponse:
        return handlers.run_estimate(req)

    @app.post("/classify", response_model=m.ClassifyResponse)
    def classify(req: m.ClassifyRequest) -> m.ClassifyResponse:
        return handlers.run_classify(req)

    @app.post("/scan", response_model=m.ScanResponse)
    def scan(req: m.ScanRequest) -> m.ScanResponse:
        return handlers.run_scan(req)

    @app.post("/perturb", response_model=m.PerturbResponse)
    def perturb(req: m.PerturbRequest) -> m.PerturbResponse:
        return handlers.run_perturb(req)

    @app.post("/conjugacy", response_model=m.ConjugacyResponse)
    def conjugacy(req: m.ConjugacyRequest) -> m.ConjugacyResponse:
        return handlers.run_conjugacy(req)

    return app


app = create_app()
