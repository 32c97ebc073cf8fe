import numpy as np
import pytest

from ruralhq.errors import InvalidDimensions
from ruralhq.rasters import read_raster
from ruralhq.synth import generate_synthetic_corpus
from ruralhq.evaluation import pearson_r


def _ballot_means(synth):
    by_image: dict[str, list[int]] = {}
    for ballot in synth.ballots:
        by_image.setdefault(ballot.image_id, []).append(ballot.score)
    return {i: float(np.mean(scores)) for i, scores in by_image.items()}


def test_deterministic_per_seed(tmp_path):
    a = generate_synthetic_corpus(seed=1, n_images=10, raters_per_image=3, side=16, out_dir=tmp_path / "a")
    b = generate_synthetic_corpus(seed=1, n_images=10, raters_per_image=3, side=16, out_dir=tmp_path / "b")
    assert [r.to_json_dict() for r in a.images] == [r.to_json_dict() for r in b.images]
    assert a.ballots == b.ballots
    assert a.latents == b.latents
    for rec_a, rec_b in zip(a.images, b.images):
        pa = read_raster((tmp_path / "a") / rec_a.pixels_ref)
        pb = read_raster((tmp_path / "b") / rec_b.pixels_ref)
        assert np.array_equal(pa, pb)


def test_different_seed_differs(tmp_path):
    a = generate_synthetic_corpus(seed=1, n_images=5, raters_per_image=3, side=16, out_dir=tmp_path / "a")
    b = generate_synthetic_corpus(seed=2, n_images=5, raters_per_image=3, side=16, out_dir=tmp_path / "b")
    assert a.latents != b.latents


def test_noiseless_ballots_equal_rounded_latent(tmp_path):
    synth = generate_synthetic_corpus(
        seed=5, n_images=30, raters_per_image=4, side=16, out_dir=tmp_path, noise_std=0.0
    )
    for ballot in synth.ballots:
        q = synth.latents[ballot.image_id]
        assert ballot.score == int(np.clip(np.rint(q), 1, 10))


def test_ballot_mean_tracks_latent_mean(tmp_path):
    synth = generate_synthetic_corpus(seed=1, n_images=500, raters_per_image=15, side=16, out_dir=tmp_path)
    means = _ballot_means(synth)
    sample_mean = float(np.mean(list(means.values())))
    latent_mean = float(np.mean(list(synth.latents.values())))
    assert abs(sample_mean - latent_mean) <= 0.15


def test_latent_ballot_correlation_exceeds_09(stat_synth):
    synth, _ = stat_synth
    means = _ballot_means(synth)
    ids = sorted(means)
    r = pearson_r([synth.latents[i] for i in ids], [means[i] for i in ids])
    assert r > 0.9


def test_brightness_monotone_in_latent(small_synth):
    synth, out = small_synth
    qs, brightness = [], []
    for record in synth.images:
        qs.append(synth.latents[record.image_id])
        brightness.append(float(read_raster(out / record.pixels_ref).mean()))
    assert pearson_r(qs, brightness) > 0.95


def test_attributes_follow_latent_quality(stat_synth):
    synth, _ = stat_synth
    by_floor: dict[int, list[float]] = {}
    ac: dict[bool, list[float]] = {True: [], False: []}
    facade: dict[str, list[float]] = {}
    for record in synth.images:
        q = synth.latents[record.image_id]
        bucket = min(record.floors, 4)
        by_floor.setdefault(bucket, []).append(q)
        ac[record.has_ac].append(q)
        facade.setdefault(record.facade, []).append(q)
    floor_means = [np.mean(by_floor[k]) for k in sorted(by_floor)]
    assert all(a < b for a, b in zip(floor_means, floor_means[1:]))
    assert np.mean(ac[True]) > np.mean(ac[False])
    assert np.mean(facade["ceramic_tile"]) > np.mean(facade["raw"])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_images": 0, "raters_per_image": 3, "side": 16},
        {"n_images": 3, "raters_per_image": 0, "side": 16},
        {"n_images": 3, "raters_per_image": 3, "side": 4},
    ],
)
def test_invalid_dimensions(tmp_path, kwargs):
    with pytest.raises(InvalidDimensions):
        generate_synthetic_corpus(seed=1, out_dir=tmp_path, **kwargs)
