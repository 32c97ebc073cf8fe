"""Desk-scale synthetic corpus generator.

Each image carries a latent quality q drawn uniformly from [1, 10]; every
observable is derived from it: pixel statistics (mean brightness, the
window-block texture frequency) rise monotonically with q, ballots are q
plus rounded Gaussian rater noise, and physical attributes (floors, air
conditioning, facade material, area per capita) are sampled so higher q
favors taller, better-equipped, tile-faced houses.

Counties are assigned round-robin, and each county owns a contiguous band
of the quality range, so county means genuinely differ: aggregation tests
need between-county signal, which i.i.d. assignment would not provide.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .corpus import FACADES, GeoPath, ImageRecord, ScoreBallot
from .errors import InvalidDimensions
from .rasters import write_ppm

BALLOT_NOISE_STD = 0.85  # corpus-wide score standard deviation

MIN_SIDE = 8


@dataclass
class SyntheticCorpus:
    images: list[ImageRecord]
    ballots: list[ScoreBallot]
    latents: dict[str, float]  # image_id -> latent quality q


def generate_synthetic_corpus(
    seed: int,
    n_images: int,
    raters_per_image: int,
    side: int,
    out_dir: str | os.PathLike,
    n_counties: int = 25,
    townships_per_county: int = 2,
    villages_per_township: int = 1,
    noise_std: float = BALLOT_NOISE_STD,
) -> SyntheticCorpus:
    """Write rasters under ``out_dir/rasters`` and return records, ballots, latents.

    Deterministic for a fixed seed: rasters, ballots and attributes are all
    drawn from a single seeded generator in image order.
    """
    if n_images < 1 or raters_per_image < 1:
        raise InvalidDimensions(
            f"need n_images >= 1 and raters_per_image >= 1, got {n_images}, {raters_per_image}"
        )
    if side < MIN_SIDE:
        raise InvalidDimensions(f"side must be >= {MIN_SIDE}, got {side}")
    if n_counties < 1 or townships_per_county < 1 or villages_per_township < 1:
        raise InvalidDimensions("geo hierarchy sizes must be >= 1")

    out_dir = os.fspath(out_dir)
    raster_dir = os.path.join(out_dir, "rasters")
    os.makedirs(raster_dir, exist_ok=True)

    rng = np.random.default_rng(seed)
    pool = _rater_pool(raters_per_image)

    images: list[ImageRecord] = []
    ballots: list[ScoreBallot] = []
    latents: dict[str, float] = {}
    ballot_index = 0

    for i in range(n_images):
        county_idx = i % n_counties
        # Latent quality: the county owns band [1 + 9k/K, 1 + 9(k+1)/K), so the
        # marginal stays uniform on [1, 10) while counties differ in level.
        q = 1.0 + 9.0 * (county_idx + rng.uniform()) / n_counties
        image_id = f"img{i:05d}"
        latents[image_id] = q

        floors = _sample_floors(q, rng)
        has_ac = bool(rng.uniform() < _sigmoid((q - 5.5) / 1.2))
        facade = _sample_facade(q, rng)
        area = float(max(5.0, 18.0 + 6.0 * q + rng.normal(0.0, 6.0)))

        pixels = _render_house(q, floors, facade, side, rng)
        pixels_ref = os.path.join("rasters", f"{image_id}.ppm")
        write_ppm(os.path.join(out_dir, pixels_ref), pixels)

        images.append(
            ImageRecord(
                image_id=image_id,
                geo=_geo_for(i, county_idx, n_counties, townships_per_county, villages_per_township),
                pixels_ref=pixels_ref,
                floors=floors,
                has_ac=has_ac,
                facade=facade,
                area_per_capita=round(area, 2),
            )
        )

        rater_offset = (i * 3) % len(pool)
        for j in range(raters_per_image):
            noise = rng.normal(0.0, noise_std) if noise_std > 0 else 0.0
            score = int(np.clip(np.rint(q + noise), 1, 10))
            ballots.append(
                ScoreBallot(
                    ballot_id=f"b{ballot_index:07d}",
                    image_id=image_id,
                    rater_id=pool[(rater_offset + j) % len(pool)],
                    score=score,
                    submitted_at=_fake_timestamp(ballot_index),
                )
            )
            ballot_index += 1

    return SyntheticCorpus(images=images, ballots=ballots, latents=latents)


def county_code_for(county_idx: int) -> str:
    return f"C{county_idx:03d}"


def synthetic_indicators(
    county_quality: dict[str, float],
    county_area: dict[str, float],
    seed: int,
) -> list[dict]:
    """County indicator rows whose income columns rise with county quality.

    ``county_quality`` and ``county_area`` are keyed by county_code. Rows come
    out sorted by county_code.
    """
    rng = np.random.default_rng(seed + 104729)
    rows = []
    for code in sorted(county_quality):
        q = county_quality[code]
        income_index = float(np.clip(0.05 + 0.09 * (q - 1.0) + rng.normal(0.0, 0.04), 0.0, 1.0))
        disposable = float(max(0.0, 8000.0 + 2200.0 * q + rng.normal(0.0, 1500.0)))
        rows.append(
            {
                "county_code": code,
                "household_income_index": round(income_index, 4),
                "disposable_income": round(disposable, 2),
                "area_per_capita": round(county_area.get(code, 0.0), 2),
            }
        )
    return rows


def synthetic_region_classes(county_codes: list[str]) -> list[dict]:
    """Deterministic north/south and east/central/west class assignment."""
    rows = []
    for code in sorted(set(county_codes)):
        idx = int(code[1:]) if code[1:].isdigit() else abs(hash(code)) % 1000
        rows.append(
            {
                "county_code": code,
                "ns_class": "south" if idx % 2 else "north",
                "ew_class": ("east", "central", "west")[idx % 3],
            }
        )
    return rows


# --- internals ---------------------------------------------------------------


def _rater_pool(raters_per_image: int) -> list[str]:
    return [f"r{k:04d}" for k in range(raters_per_image + 7)]


def _fake_timestamp(index: int) -> str:
    # Deterministic stand-in timestamps keep synthetic artifacts byte-identical.
    minute, second = divmod(index, 60)
    hour, minute = divmod(minute, 60)
    day, hour = divmod(hour, 24)
    return f"2024-01-{1 + day % 28:02d}T{hour:02d}:{minute:02d}:{second:02d}Z"


def _geo_for(
    i: int, county_idx: int, n_counties: int, townships_per_county: int, villages_per_township: int
) -> GeoPath:
    round_idx = i // n_counties
    township_idx = round_idx % townships_per_county
    village_idx = (round_idx // townships_per_county) % villages_per_township
    return GeoPath(
        province=f"P{county_idx // 5:02d}",
        county=f"County{county_idx:03d}",
        township=f"T{township_idx:02d}",
        village=f"V{village_idx:02d}",
        county_code=county_code_for(county_idx),
    )


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _sample_floors(q: float, rng: np.random.Generator) -> int:
    latent = (q - 1.0) / 2.2 + rng.normal(0.0, 0.8)
    return int(np.clip(1 + np.rint(latent), 1, 5))


def _sample_facade(q: float, rng: np.random.Generator) -> str:
    latent = q + rng.normal(0.0, 1.3)
    if latent < 3.5:
        return FACADES[3]  # raw
    if latent < 5.75:
        return FACADES[1]  # cement
    if latent < 7.75:
        return FACADES[2]  # paint
    return FACADES[0]  # ceramic_tile


_FACADE_TINT = {
    "ceramic_tile": np.array([4.0, 8.0, 14.0]),
    "cement": np.array([0.0, 0.0, 0.0]),
    "paint": np.array([12.0, 4.0, -6.0]),
    "raw": np.array([-6.0, -14.0, -22.0]),
}


def _render_house(q: float, floors: int, facade: str, side: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a stylized house whose brightness and window density follow q."""
    base = 40.0 + 18.0 * q  # wall brightness, ~58 at q=1 up to ~220 at q=10
    img = np.full((side, side, 3), base, dtype=np.float64)
    img += _FACADE_TINT[facade]

    # Sky strip at the top, slightly lighter than the wall at low q.
    sky_h = max(1, side // 8)
    img[:sky_h] = 150.0 + 6.0 * q

    # Texture: a row of dark window blocks per floor; more windows at higher q.
    n_windows = 1 + int(round(q / 2.0))  # 1..6
    wall_top, wall_bottom = sky_h, side - max(1, side // 10)
    wall_h = wall_bottom - wall_top
    n_rows = min(max(floors, 1), 3)
    win_w = max(1, side // (2 * n_windows + 1))
    win_h = max(1, wall_h // (3 * n_rows))
    for r in range(n_rows):
        y0 = wall_top + (r * wall_h) // n_rows + max(1, win_h // 2)
        for k in range(n_windows):
            x0 = ((k + 1) * side) // (n_windows + 1) - win_w // 2
            img[y0 : y0 + win_h, max(0, x0) : x0 + win_w] = base - 70.0
        if r > 0:  # floor separator line
            ysep = wall_top + (r * wall_h) // n_rows
            img[ysep : ysep + 1, :] = base - 40.0

    # Ground strip.
    img[wall_bottom:] = 90.0 + 2.0 * q

    img += rng.normal(0.0, 6.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)
