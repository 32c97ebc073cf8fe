"""Data model for geo-tagged house images and crowdsourced score ballots.

The tally kept per image is a 10-bin count vector over integer scores 1-10;
an image's score distribution is the ballot-frequency vector over those bins
together with its derived mean and standard deviation. An image becomes
"qualified" once at least :data:`QUALIFIED_MIN_BALLOTS` distinct raters have
scored it.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

from .errors import (
    DataError,
    DuplicateImageId,
    DuplicateRaterImage,
    MalformedGeoPath,
    NoBallots,
    ScoreOutOfRange,
    UnknownImage,
    UnreadableRaster,
)

SCORE_MIN = 1
SCORE_MAX = 10
N_BINS = SCORE_MAX - SCORE_MIN + 1
QUALIFIED_MIN_BALLOTS = 15

FACADES = ("ceramic_tile", "cement", "paint", "raw")

IMAGES_FILENAME = "images.jsonl"
BALLOTS_FILENAME = "ballots.jsonl"


@dataclass(frozen=True)
class GeoPath:
    """Administrative hierarchy an image belongs to.

    ``township`` and ``village`` are either both present or both empty:
    a village cannot float without its township and a township entry
    without a village would leave a gap in the hierarchy.
    """

    province: str
    county: str
    township: str = ""
    village: str = ""
    county_code: str = ""

    def validate(self) -> None:
        if not self.province or not self.county:
            raise MalformedGeoPath(
                f"province and county are required, got province={self.province!r} county={self.county!r}"
            )
        if bool(self.township) != bool(self.village):
            raise MalformedGeoPath(
                f"township and village must be both set or both empty, got "
                f"township={self.township!r} village={self.village!r}"
            )

    def key(self, level: str) -> tuple[str, ...]:
        """Region key prefix for an aggregation level."""
        if level == "county":
            return (self.province, self.county)
        if level == "township":
            return (self.province, self.county, self.township)
        if level == "village":
            return (self.province, self.county, self.township, self.village)
        raise ValueError(f"unknown aggregation level {level!r}")


@dataclass(frozen=True)
class ImageRecord:
    """One geo-tagged house image plus optional physical attributes."""

    image_id: str
    geo: GeoPath
    pixels_ref: str
    floors: int | None = None
    has_ac: bool | None = None
    facade: str | None = None
    area_per_capita: float | None = None

    def validate(self) -> None:
        if not self.image_id:
            raise DataError("image_id must be non-empty")
        self.geo.validate()
        if not self.pixels_ref:
            raise DataError(f"image {self.image_id!r}: pixels_ref must be non-empty")
        if self.floors is not None and (not isinstance(self.floors, int) or self.floors < 1):
            raise DataError(f"image {self.image_id!r}: floors must be a positive integer")
        if self.facade is not None and self.facade not in FACADES:
            raise DataError(f"image {self.image_id!r}: unknown facade {self.facade!r}")
        if self.area_per_capita is not None and not self.area_per_capita >= 0:
            raise DataError(f"image {self.image_id!r}: area_per_capita must be >= 0")

    def to_json_dict(self) -> dict:
        d = {
            "image_id": self.image_id,
            "province": self.geo.province,
            "county": self.geo.county,
            "county_code": self.geo.county_code,
            "township": self.geo.township,
            "village": self.geo.village,
            "pixels_ref": self.pixels_ref,
        }
        if self.floors is not None:
            d["floors"] = self.floors
        if self.has_ac is not None:
            d["has_ac"] = self.has_ac
        if self.facade is not None:
            d["facade"] = self.facade
        if self.area_per_capita is not None:
            d["area_per_capita"] = self.area_per_capita
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ImageRecord":
        try:
            record = cls(
                image_id=d["image_id"],
                geo=GeoPath(
                    province=d["province"],
                    county=d["county"],
                    township=d.get("township", ""),
                    village=d.get("village", ""),
                    county_code=d.get("county_code", ""),
                ),
                pixels_ref=d["pixels_ref"],
                floors=d.get("floors"),
                has_ac=d.get("has_ac"),
                facade=d.get("facade"),
                area_per_capita=d.get("area_per_capita"),
            )
        except KeyError as exc:
            raise DataError(f"image row missing key {exc}") from exc
        record.validate()
        return record


@dataclass(frozen=True)
class ScoreBallot:
    """One rater's integer score for one image."""

    ballot_id: str
    image_id: str
    rater_id: str
    score: int
    submitted_at: str

    def to_json_dict(self) -> dict:
        return {
            "ballot_id": self.ballot_id,
            "image_id": self.image_id,
            "rater_id": self.rater_id,
            "score": self.score,
            "submitted_at": self.submitted_at,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScoreBallot":
        try:
            return cls(
                ballot_id=d["ballot_id"],
                image_id=d["image_id"],
                rater_id=d["rater_id"],
                score=int(d["score"]),
                submitted_at=d.get("submitted_at", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed ballot row: {exc}") from exc


@dataclass(frozen=True)
class ScoreDistribution:
    """10-bin probability vector over scores 1-10 with derived moments."""

    p: tuple[float, ...]
    n_ballots: int
    mean: float
    std: float
    qualified: bool

    @classmethod
    def from_counts(cls, counts: Sequence[int], min_raters: int = QUALIFIED_MIN_BALLOTS) -> "ScoreDistribution":
        if len(counts) != N_BINS:
            raise ValueError(f"expected {N_BINS} bins, got {len(counts)}")
        n = int(sum(counts))
        if n <= 0:
            raise NoBallots("cannot build a distribution from zero ballots")
        p = tuple(c / n for c in counts)
        return cls.from_probabilities(p, n_ballots=n, min_raters=min_raters)

    @classmethod
    def from_probabilities(
        cls, p: Sequence[float], n_ballots: int = 0, min_raters: int = QUALIFIED_MIN_BALLOTS
    ) -> "ScoreDistribution":
        p = tuple(float(v) for v in p)
        mean = sum(j * pj for j, pj in zip(range(SCORE_MIN, SCORE_MAX + 1), p))
        var = sum(pj * (j - mean) ** 2 for j, pj in zip(range(SCORE_MIN, SCORE_MAX + 1), p))
        return cls(
            p=p,
            n_ballots=n_ballots,
            mean=mean,
            std=math.sqrt(max(var, 0.0)),
            qualified=n_ballots >= min_raters,
        )

    def to_json_dict(self) -> dict:
        return {
            "p": list(self.p),
            "n_ballots": self.n_ballots,
            "mean": self.mean,
            "std": self.std,
            "qualified": self.qualified,
        }


class Corpus:
    """Image registry plus per-image ballot tallies.

    Ballot submission is serialized through an internal lock so concurrent
    callers see consistent tallies; every accepted ballot is appended to the
    in-memory log (and, when a log file is attached, to disk with a flush per
    line, so a crash loses at most the final partial line).
    """

    def __init__(self, root: str | os.PathLike | None = None):
        self.root = os.fspath(root) if root is not None else None
        self._images: dict[str, ImageRecord] = {}
        self._counts: dict[str, list[int]] = {}
        self._ballots: list[ScoreBallot] = []
        self._rater_scored: dict[str, set[str]] = {}
        self._lock = threading.RLock()
        self._log_fh: IO[str] | None = None

    # --- images -----------------------------------------------------------

    def ingest_images(self, rows: Iterable[ImageRecord], check_rasters: bool = True) -> int:
        """Add records, rejecting duplicates and unreadable rasters. Returns corpus size."""
        with self._lock:
            for record in rows:
                record.validate()
                if record.image_id in self._images:
                    raise DuplicateImageId(f"duplicate image_id {record.image_id!r}")
                if check_rasters:
                    path = self.resolve_pixels(record)
                    if not os.path.isfile(path):
                        raise UnreadableRaster(
                            f"image {record.image_id!r}: raster {path!r} does not exist"
                        )
                self._images[record.image_id] = record
            return len(self._images)

    def resolve_pixels(self, record: ImageRecord) -> str:
        if os.path.isabs(record.pixels_ref) or self.root is None:
            return record.pixels_ref
        return os.path.join(self.root, record.pixels_ref)

    def __len__(self) -> int:
        return len(self._images)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._images

    def image(self, image_id: str) -> ImageRecord:
        try:
            return self._images[image_id]
        except KeyError:
            raise UnknownImage(f"unknown image {image_id!r}") from None

    def image_ids(self) -> list[str]:
        return sorted(self._images)

    def images(self) -> Iterator[ImageRecord]:
        for image_id in sorted(self._images):
            yield self._images[image_id]

    # --- ballots ----------------------------------------------------------

    def submit_ballot(self, ballot: ScoreBallot) -> ScoreDistribution:
        """Record one ballot and return the image's updated distribution."""
        with self._lock:
            if ballot.image_id not in self._images:
                raise UnknownImage(f"unknown image {ballot.image_id!r}")
            if not isinstance(ballot.score, int) or not SCORE_MIN <= ballot.score <= SCORE_MAX:
                raise ScoreOutOfRange(
                    f"score {ballot.score!r} outside integer range [{SCORE_MIN}, {SCORE_MAX}]"
                )
            scored = self._rater_scored.setdefault(ballot.rater_id, set())
            if ballot.image_id in scored:
                raise DuplicateRaterImage(
                    f"rater {ballot.rater_id!r} already scored image {ballot.image_id!r}"
                )
            counts = self._counts.setdefault(ballot.image_id, [0] * N_BINS)
            counts[ballot.score - SCORE_MIN] += 1
            scored.add(ballot.image_id)
            self._ballots.append(ballot)
            if self._log_fh is not None:
                self._log_fh.write(json.dumps(ballot.to_json_dict(), ensure_ascii=False) + "\n")
                self._log_fh.flush()
            return ScoreDistribution.from_counts(counts)

    def distribution_of(self, image_id: str) -> ScoreDistribution:
        with self._lock:
            if image_id not in self._images:
                raise UnknownImage(f"unknown image {image_id!r}")
            counts = self._counts.get(image_id)
            if not counts or sum(counts) == 0:
                raise NoBallots(f"image {image_id!r} has no ballots")
            return ScoreDistribution.from_counts(counts)

    def ballot_count(self, image_id: str) -> int:
        with self._lock:
            counts = self._counts.get(image_id)
            return sum(counts) if counts else 0

    def qualified_images(self, min_raters: int = QUALIFIED_MIN_BALLOTS) -> list[str]:
        with self._lock:
            return sorted(
                image_id
                for image_id in self._images
                if sum(self._counts.get(image_id, ())) >= min_raters
            )

    def tallied_images(self) -> list[str]:
        """Images with at least one ballot, sorted."""
        return self.qualified_images(min_raters=1)

    def rater_scored(self, rater_id: str) -> set[str]:
        with self._lock:
            return set(self._rater_scored.get(rater_id, ()))

    def ballots(self) -> list[ScoreBallot]:
        """Snapshot of the accepted-ballot log, in acceptance order."""
        with self._lock:
            return list(self._ballots)

    # --- durability ---------------------------------------------------------

    def attach_log(self, path: str | os.PathLike) -> None:
        """Append accepted ballots to ``path`` from now on, one JSON line each."""
        self._log_fh = open(path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    def export_snapshot(self, directory: str | os.PathLike) -> tuple[int, int]:
        """Write images.jsonl and ballots.jsonl for a consistent tally snapshot.

        Returns (n_images, n_ballots) written. The ballot list is copied under
        the lock, so a concurrent writer can only extend the log past the
        exported prefix, never reorder it.
        """
        with self._lock:
            images = [self._images[i] for i in sorted(self._images)]
            ballots = list(self._ballots)
        directory = os.fspath(directory)
        os.makedirs(directory, exist_ok=True)
        write_images_jsonl(os.path.join(directory, IMAGES_FILENAME), images)
        write_ballots_jsonl(os.path.join(directory, BALLOTS_FILENAME), ballots)
        return len(images), len(ballots)


# --- jsonl round-trip -------------------------------------------------------


def write_images_jsonl(path: str | os.PathLike, images: Iterable[ImageRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in images:
            fh.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_images_jsonl(path: str | os.PathLike) -> list[ImageRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ImageRecord.from_json_dict(json.loads(line)))
    return records


def write_ballots_jsonl(path: str | os.PathLike, ballots: Iterable[ScoreBallot]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ballot in ballots:
            fh.write(json.dumps(ballot.to_json_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_ballots_jsonl(path: str | os.PathLike) -> list[ScoreBallot]:
    """Read the append-only ballot log, skipping a trailing partial line."""
    ballots = []
    with open(path, "rb") as fh:
        raw = fh.read()
    lines = raw.split(b"\n")
    # A crash mid-append can leave one unterminated line at the end.
    tail_complete = raw.endswith(b"\n") or not raw
    for i, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            if i == len(lines) - 1 and not tail_complete:
                break
            raise DataError(f"corrupt ballot log line {i + 1} in {os.fspath(path)!r}")
        ballots.append(ScoreBallot.from_json_dict(d))
    return ballots


def load_corpus(data_dir: str | os.PathLike, check_rasters: bool = True) -> Corpus:
    """Build a corpus from a data directory holding images.jsonl and ballots.jsonl.

    Replaying the ballot log reproduces every tally exactly; the distribution
    of an image is a pure function of its accepted ballots.
    """
    data_dir = os.fspath(data_dir)
    corpus = Corpus(root=data_dir)
    images_path = os.path.join(data_dir, IMAGES_FILENAME)
    corpus.ingest_images(read_images_jsonl(images_path), check_rasters=check_rasters)
    ballots_path = os.path.join(data_dir, BALLOTS_FILENAME)
    if os.path.exists(ballots_path):
        for ballot in read_ballots_jsonl(ballots_path):
            corpus.submit_ballot(ballot)
    return corpus
