"""Hierarchical regional aggregation and inequality analytics.

Regional quality is the unweighted mean of image-level quality over every
image in the region, at village, township, or county granularity. The Gini
coefficient uses the plain pairwise definition, computed through the sorted
O(n log n) identity; the quality-weighted variant applies it to
area_per_capita x mean_quality, the per-county housing-asset proxy.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ImageRecord
from .errors import (
    AllZero,
    DuplicateCountyCode,
    JoinTooSmall,
    LengthMismatch,
    MissingGeoField,
    NegativeValue,
    TooFewRegions,
    UnmappedCounty,
)
from .evaluation import pearson_r

LEVELS = ("village", "township", "county")

# A village needs more than 5 images to count; townships and counties always do.
DEFAULT_MIN_IMAGES = {"village": 6, "township": 1, "county": 1}


@dataclass(frozen=True)
class RegionAggregate:
    level: str
    key: tuple[str, ...]
    mean_quality: float
    n_images: int
    included: bool
    county_code: str = ""

    def to_row(self) -> dict:
        padded = self.key + ("",) * (4 - len(self.key))
        return {
            "level": self.level,
            "province": padded[0],
            "county": padded[1],
            "township": padded[2],
            "village": padded[3],
            "county_code": self.county_code,
            "mean_quality": self.mean_quality,
            "n_images": self.n_images,
            "included": self.included,
        }


def aggregate_regions(
    images: Sequence[ImageRecord],
    means: Mapping[str, float],
    level: str,
    min_images: int | None = None,
) -> list[RegionAggregate]:
    """Unweighted mean quality per region, sorted by region key.

    Only images present in ``means`` contribute. A region whose image count
    falls below ``min_images`` keeps its aggregate but is flagged excluded.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    threshold = DEFAULT_MIN_IMAGES[level] if min_images is None else min_images
    grouped: dict[tuple[str, ...], list[float]] = {}
    codes: dict[tuple[str, ...], str] = {}
    for record in images:
        if record.image_id not in means:
            continue
        geo = record.geo
        if level in ("village", "township") and not geo.township:
            raise MissingGeoField(
                f"image {record.image_id!r} lacks township/village fields required "
                f"for {level}-level aggregation"
            )
        key = geo.key(level)
        grouped.setdefault(key, []).append(means[record.image_id])
        codes.setdefault(key, geo.county_code)
    return [
        RegionAggregate(
            level=level,
            key=key,
            mean_quality=float(np.mean(values)),
            n_images=len(values),
            included=len(values) >= threshold,
            county_code=codes[key],
        )
        for key, values in sorted(grouped.items())
    ]


def write_aggregates_csv(path: str | os.PathLike, aggregates: Sequence[RegionAggregate]) -> None:
    columns = [
        "level", "province", "county", "township", "village",
        "county_code", "mean_quality", "n_images", "included",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for agg in aggregates:
            row = agg.to_row()
            row["mean_quality"] = repr(row["mean_quality"])
            row["included"] = str(row["included"]).lower()
            writer.writerow(row)


# --- inequality ---------------------------------------------------------------


def gini(values: Sequence[float]) -> float:
    """Gini coefficient of non-negative values: half the mean absolute
    pairwise difference divided by the mean, via the sorted-rank identity."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 1:
        raise LengthMismatch("gini needs at least one value")
    if np.any(x < 0):
        raise NegativeValue("gini is undefined for negative values")
    total = float(x.sum())
    if total <= 0.0:
        raise AllZero("gini is undefined when all values are zero")
    x = np.sort(x)
    n = x.size
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return float((2.0 * np.dot(ranks, x) - (n + 1) * total) / (n * total))


@dataclass(frozen=True)
class InequalityReport:
    gini_area: float
    gini_weighted: float
    relative_increase: float
    relative_increase_defined: bool

    def to_json_dict(self) -> dict:
        return {
            "gini_area": self.gini_area,
            "gini_weighted": self.gini_weighted,
            "relative_increase": self.relative_increase,
            "relative_increase_defined": self.relative_increase_defined,
        }


def weighted_inequality_report(
    area_per_capita: Sequence[float], mean_quality: Sequence[float]
) -> InequalityReport:
    """Gini of per-capita area vs Gini of quality-weighted area (area x quality)."""
    area = np.asarray(area_per_capita, dtype=np.float64)
    quality = np.asarray(mean_quality, dtype=np.float64)
    if area.shape != quality.shape or area.ndim != 1:
        raise LengthMismatch("area and quality vectors must have the same length")
    if int(np.sum(area > 0)) < 2:
        raise TooFewRegions("need at least 2 regions with positive area")
    gini_area = gini(area)
    gini_weighted = gini(area * quality)
    if gini_area > 0.0:
        return InequalityReport(gini_area, gini_weighted, gini_weighted / gini_area - 1.0, True)
    return InequalityReport(gini_area, gini_weighted, 0.0, False)


def write_inequality_json(path: str | os.PathLike, report: InequalityReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- county indicator tables ----------------------------------------------------


@dataclass(frozen=True)
class IndicatorRow:
    county_code: str
    household_income_index: float | None
    disposable_income: float | None
    area_per_capita: float | None


INDICATOR_COLUMNS = ("household_income_index", "disposable_income", "area_per_capita")


def read_indicators_csv(path: str | os.PathLike) -> list[IndicatorRow]:
    rows: list[IndicatorRow] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            code = (record.get("county_code") or "").strip()
            if not code:
                continue
            if code in seen:
                raise DuplicateCountyCode(f"county_code {code!r} appears twice")
            seen.add(code)

            def parse(column: str) -> float | None:
                raw = (record.get(column) or "").strip()
                return float(raw) if raw else None

            rows.append(
                IndicatorRow(
                    county_code=code,
                    household_income_index=parse("household_income_index"),
                    disposable_income=parse("disposable_income"),
                    area_per_capita=parse("area_per_capita"),
                )
            )
    return rows


def write_indicators_csv(path: str | os.PathLike, rows: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("county_code",) + INDICATOR_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


@dataclass(frozen=True)
class IndicatorCorrelation:
    indicator: str
    r: float
    n_joined: int


def indicator_correlations(
    county_aggregates: Sequence[RegionAggregate], indicators: Sequence[IndicatorRow]
) -> list[IndicatorCorrelation]:
    """Pearson r between county mean quality and each indicator column.

    The join is an inner join on county_code; a county missing one indicator
    is dropped from that indicator's correlation only.
    """
    quality = {a.county_code: a.mean_quality for a in county_aggregates if a.county_code}
    results = []
    for column in INDICATOR_COLUMNS:
        xs, ys = [], []
        for row in indicators:
            value = getattr(row, column)
            if value is None or row.county_code not in quality:
                continue
            xs.append(quality[row.county_code])
            ys.append(value)
        if len(xs) < 3:
            raise JoinTooSmall(
                f"indicator {column!r} joins only {len(xs)} counties, need at least 3"
            )
        results.append(IndicatorCorrelation(indicator=column, r=pearson_r(xs, ys), n_joined=len(xs)))
    return results


# --- directional gaps -----------------------------------------------------------

NS_CLASSES = ("north", "south")
EW_CLASSES = ("east", "central", "west")


def read_region_classes_csv(path: str | os.PathLike) -> dict[str, tuple[str, str]]:
    classes: dict[str, tuple[str, str]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            code = (record.get("county_code") or "").strip()
            if not code:
                continue
            classes[code] = (
                (record.get("ns_class") or "").strip(),
                (record.get("ew_class") or "").strip(),
            )
    return classes


@dataclass(frozen=True)
class GapReport:
    class_means: dict[str, float | None]
    class_counts: dict[str, int]
    gaps: dict[str, float | None]

    def rows(self) -> list[tuple[str, str, str]]:
        out = []
        for name in NS_CLASSES + EW_CLASSES:
            mean = self.class_means.get(name)
            out.append(("class_mean", name, "" if mean is None else repr(mean)))
            out.append(("class_count", name, str(self.class_counts.get(name, 0))))
        for name, value in self.gaps.items():
            out.append(("gap", name, "" if value is None else repr(value)))
        return out


def directional_gap_report(
    county_aggregates: Sequence[RegionAggregate], classes: Mapping[str, tuple[str, str]]
) -> GapReport:
    """Mean quality per directional class and the pairwise class differences.

    A gap involving an empty class is undefined and reported as None.
    """
    members: dict[str, list[float]] = {name: [] for name in NS_CLASSES + EW_CLASSES}
    for agg in county_aggregates:
        if agg.county_code not in classes:
            raise UnmappedCounty(f"county_code {agg.county_code!r} has no region class")
        ns, ew = classes[agg.county_code]
        if ns in members:
            members[ns].append(agg.mean_quality)
        if ew in members:
            members[ew].append(agg.mean_quality)

    class_means: dict[str, float | None] = {
        name: (float(np.mean(vals)) if vals else None) for name, vals in members.items()
    }
    class_counts = {name: len(vals) for name, vals in members.items()}

    def gap(a: str, b: str) -> float | None:
        if class_means[a] is None or class_means[b] is None:
            return None
        return class_means[a] - class_means[b]

    gaps = {
        "south_minus_north": gap("south", "north"),
        "east_minus_west": gap("east", "west"),
        "east_minus_central": gap("east", "central"),
        "central_minus_west": gap("central", "west"),
    }
    return GapReport(class_means=class_means, class_counts=class_counts, gaps=gaps)


def write_gaps_csv(path: str | os.PathLike, report: GapReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "name", "value"])
        writer.writerows(report.rows())
