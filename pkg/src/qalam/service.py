"""HTTP inference service.

JSON over HTTP; the client sends raw 32x32 pixel arrays (white-on-black,
0-255) so the service never touches image codecs. Error mapping: malformed
bodies and out-of-contract stroke counts are 400, a stroke count the group
table cannot route is 422 (the client may fall back to single mode), and
asking for a model that is not loaded is 503.

Loaded bundles are immutable and shared across requests without locks;
inference is deterministic, so identical requests give identical responses.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__, model, strokes
from .data import ARABIC_CLASSES, IMAGE_SIZE, PIXELS


class PredictRequest(BaseModel):
    image: list[int] | list[list[int]]
    strokes: int | None = None
    mode: Literal["single", "multi"] = "single"


def _parse_image(raw) -> np.ndarray:
    if raw and isinstance(raw[0], list):
        if len(raw) != IMAGE_SIZE or any(len(row) != IMAGE_SIZE for row in raw):
            raise ValueError(f"2-D image must be {IMAGE_SIZE}x{IMAGE_SIZE}")
        flat = [v for row in raw for v in row]
    else:
        if len(raw) != PIXELS:
            raise ValueError(f"flat image must have exactly {PIXELS} pixels, got {len(raw)}")
        flat = raw
    arr = np.array(flat, dtype=np.int64)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("pixel values must be 0-255")
    return (arr.reshape(IMAGE_SIZE, IMAGE_SIZE).astype(np.float32)) / 255.0


def create_app(single: model.TrainedBundle | None = None,
               multi: strokes.MultiModelBundle | None = None) -> FastAPI:
    app = FastAPI(title="qalam inference service", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    app.state.single = single
    app.state.multi = multi

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/v1/health")
    def health():
        loaded = app.state.single is not None or app.state.multi is not None
        return {
            "status": "ok" if loaded else "loading",
            "version": __version__,
            "single_model": app.state.single is not None,
            "multi_model": app.state.multi is not None,
        }

    @app.get("/v1/labels")
    def labels():
        return {
            "classes": [
                {"index": i, "name": c.key, "translit": c.translit, "glyph": c.glyph}
                for i, c in enumerate(ARABIC_CLASSES)
            ],
        }

    @app.get("/v1/groups")
    def groups():
        return {
            "version": strokes.GROUP_TABLE_VERSION,
            "groups": [
                {"id": g, "strokes": g, "size": len(names), "classes": list(names)}
                for g, names in sorted(strokes.GROUPS.items())
            ],
        }

    @app.post("/v1/predict")
    def predict(req: PredictRequest):
        try:
            image = _parse_image(req.image)
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        if req.strokes is not None and req.strokes < 1:
            return JSONResponse(
                status_code=400,
                content={"detail": f"stroke count must be >= 1, got {req.strokes}"})

        if req.mode == "multi":
            if req.strokes is None:
                return JSONResponse(
                    status_code=400,
                    content={"detail": "multi mode requires a stroke count"})
            if app.state.multi is None:
                return JSONResponse(
                    status_code=503, content={"detail": "no multi-model bundle loaded"})
            try:
                pred = strokes.predict_multi(app.state.multi, image, req.strokes)
            except strokes.RoutingError as exc:
                return JSONResponse(
                    status_code=422,
                    content={"detail": f"{exc}; fall back to mode 'single'"})
            return {
                "label": pred.label,
                "label_index": pred.label_index,
                "probabilities": {n: float(p) for n, p in
                                  zip(pred.classes, pred.probabilities)},
                "group": pred.group,
                "model": f"group-{pred.group}",
            }

        if app.state.single is None:
            return JSONResponse(status_code=503, content={"detail": "no model loaded"})
        bundle = app.state.single
        idx, probs = model.predict(bundle.network, image)
        return {
            "label": bundle.label_names[idx],
            "label_index": idx,
            "probabilities": {n: float(p) for n, p in zip(bundle.label_names, probs)},
            "group": None,
            "model": "single",
        }

    return app
