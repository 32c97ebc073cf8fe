"""HTTP backend for the scoring UI and batch consumers.

JSON over HTTP: raters pull the least-scored image they have not seen,
submit 1-10 ballots, and read per-image distributions; analysts read
regional aggregates and model predictions. Error responses always carry
``{"code", "message"}`` with 404 for unknown images, 422 for out-of-range
scores, and 409 for duplicate (rater, image) pairs.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import rasters
from .corpus import Corpus, ScoreBallot, ScoreDistribution
from .errors import (
    DuplicateRaterImage,
    NoBallots,
    NothingLeft,
    ScoreOutOfRange,
    UnknownImage,
    UnreadableRaster,
)
from .geostat import LEVELS, aggregate_regions
from .nn.checkpoint import load_checkpoint
from .training import predict_corpus


@dataclass
class RaterSession:
    rater_id: str
    served: set[str] = field(default_factory=set)
    completed: int = 0


class ScoringService:
    """Corpus facade adding rater sessions and a lazily loaded model."""

    def __init__(self, corpus: Corpus, checkpoint_path: str | None = None):
        self.corpus = corpus
        self.checkpoint_path = checkpoint_path
        self._sessions: dict[str, RaterSession] = {}
        self._params = None
        self._lock = threading.Lock()

    def session(self, rater_id: str) -> RaterSession:
        with self._lock:
            return self._sessions.setdefault(rater_id, RaterSession(rater_id))

    def next_image_for(self, rater_id: str) -> dict:
        """The unscored-by-this-rater image with the fewest ballots.

        Ties break toward the lexicographically smallest image_id.
        """
        scored = self.corpus.rater_scored(rater_id)
        best: tuple[int, str] | None = None
        for image_id in self.corpus.image_ids():
            if image_id in scored:
                continue
            key = (self.corpus.ballot_count(image_id), image_id)
            if best is None or key < best:
                best = key
        if best is None:
            raise NothingLeft(f"rater {rater_id!r} has scored every image")
        n_ballots, image_id = best[0], best[1]
        session = self.session(rater_id)
        with self._lock:
            session.served.add(image_id)
        return {
            "image_id": image_id,
            "pixels_url": f"/images/{image_id}.png",
            "n_ballots": n_ballots,
        }

    def record_ballot(self, rater_id: str, image_id: str, score: int) -> ScoreDistribution:
        ballot = ScoreBallot(
            ballot_id=uuid.uuid4().hex,
            image_id=image_id,
            rater_id=rater_id,
            score=score,
            submitted_at=datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        )
        dist = self.corpus.submit_ballot(ballot)
        session = self.session(rater_id)
        with self._lock:
            session.completed += 1
        return dist

    def predict(self, image_id: str) -> ScoreDistribution:
        params = self._load_params()
        return predict_corpus(params, [image_id], self.corpus)[image_id]

    def _load_params(self):
        with self._lock:
            if self._params is None:
                if not self.checkpoint_path:
                    raise FileNotFoundError("no model checkpoint configured")
                _, self._params = load_checkpoint(self.checkpoint_path)
            return self._params

    def export_snapshot(self, directory) -> tuple[int, int]:
        return self.corpus.export_snapshot(directory)


class BallotRequest(BaseModel):
    rater_id: str
    image_id: str
    score: int


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(service: ScoringService) -> FastAPI:
    app = FastAPI(title="rural housing quality scoring")

    @app.get("/api/next")
    def next_image(rater: str):
        if not rater:
            return _error(422, "missing_rater", "query parameter 'rater' is required")
        try:
            return service.next_image_for(rater)
        except NothingLeft as exc:
            return _error(404, "nothing_left", str(exc))

    @app.post("/api/ballots")
    def submit_ballot(req: BallotRequest):
        try:
            dist = service.record_ballot(req.rater_id, req.image_id, req.score)
        except UnknownImage as exc:
            return _error(404, "unknown_image", str(exc))
        except ScoreOutOfRange as exc:
            return _error(422, "score_out_of_range", str(exc))
        except DuplicateRaterImage as exc:
            return _error(409, "duplicate_ballot", str(exc))
        return {"n_ballots": dist.n_ballots, "qualified": dist.qualified}

    @app.get("/api/images/{image_id}/distribution")
    def distribution(image_id: str):
        try:
            return service.corpus.distribution_of(image_id).to_json_dict()
        except UnknownImage as exc:
            return _error(404, "unknown_image", str(exc))
        except NoBallots as exc:
            return _error(404, "no_ballots", str(exc))

    @app.get("/api/aggregates")
    def aggregates(level: str = "county", min_images: int | None = None):
        if level not in LEVELS:
            return _error(422, "bad_level", f"level must be one of {', '.join(LEVELS)}")
        corpus = service.corpus
        means = {i: corpus.distribution_of(i).mean for i in corpus.tallied_images()}
        images = [corpus.image(i) for i in sorted(means)]
        aggs = aggregate_regions(images, means, level, min_images=min_images)
        return [a.to_row() for a in aggs]

    @app.get("/api/predict/{image_id}")
    def predict(image_id: str):
        try:
            return service.predict(image_id).to_json_dict()
        except FileNotFoundError as exc:
            return _error(503, "no_checkpoint", str(exc))
        except UnknownImage as exc:
            return _error(404, "unknown_image", str(exc))
        except UnreadableRaster as exc:
            return _error(404, "unreadable_raster", str(exc))

    @app.get("/images/{image_id}.png")
    def image_png(image_id: str):
        try:
            record = service.corpus.image(image_id)
            pixels = rasters.read_raster(service.corpus.resolve_pixels(record))
        except UnknownImage as exc:
            return _error(404, "unknown_image", str(exc))
        except UnreadableRaster as exc:
            return _error(404, "unreadable_raster", str(exc))
        return Response(content=rasters.png_bytes(pixels), media_type="image/png")

    return app


def serve(
    data_dir: str,
    addr: str = "127.0.0.1:8000",
    checkpoint_path: str | None = None,
) -> None:
    """Load the corpus from ``data_dir``, attach the append-only ballot log, serve."""
    import uvicorn

    from .corpus import BALLOTS_FILENAME, load_corpus
    import os

    corpus = load_corpus(data_dir)
    corpus.attach_log(os.path.join(data_dir, BALLOTS_FILENAME))
    app = create_app(ScoringService(corpus, checkpoint_path=checkpoint_path))
    host, _, port = addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
