"""HTTP binding: POST /embed takes a FASTA body and returns AEMB bytes;
GET /status reports the loaded checkpoint and its dimension."""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .core import Embedder, EmbedderError, SequenceTooLong
from .fastaio import FastaError


def create_app(embedder: Embedder) -> FastAPI:
    app = FastAPI(title="esm-embedder")

    @app.get("/status")
    def status() -> dict:
        return {
            "model": embedder.config.model_name,
            "dim": embedder.dim,
            "layer": embedder.layer,
        }

    @app.post("/embed")
    async def embed(request: Request) -> Response:
        body = await request.body()
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError:
            return JSONResponse({"error": "body is not UTF-8 text"}, status_code=400)
        try:
            payload = embedder.embed_fasta_bytes(text)
        except (FastaError, SequenceTooLong) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        except EmbedderError as exc:
            return JSONResponse({"error": str(exc)}, status_code=500)
        return Response(content=payload, media_type="application/octet-stream")

    return app
