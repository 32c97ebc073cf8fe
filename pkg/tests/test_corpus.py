import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ruralhq.corpus import (
    Corpus,
    GeoPath,
    ImageRecord,
    ScoreBallot,
    ScoreDistribution,
    load_corpus,
    read_ballots_jsonl,
    write_ballots_jsonl,
    write_images_jsonl,
)
from ruralhq.errors import (
    DuplicateImageId,
    DuplicateRaterImage,
    MalformedGeoPath,
    NoBallots,
    ScoreOutOfRange,
    UnknownImage,
    UnreadableRaster,
)
from ruralhq.rasters import write_ppm


def _raster(tmp_path, name="img.ppm", side=8):
    path = tmp_path / name
    write_ppm(path, np.full((side, side, 3), 128, dtype=np.uint8))
    return str(path)


def _record(image_id, tmp_path, township="T1", village="V1"):
    return ImageRecord(
        image_id=image_id,
        geo=GeoPath(
            province="P", county="C", township=township, village=village, county_code="C001"
        ),
        pixels_ref=_raster(tmp_path, f"{image_id}.ppm"),
    )


def _ballot(image_id, rater, score, i=0):
    return ScoreBallot(
        ballot_id=f"b{i}", image_id=image_id, rater_id=rater, score=score,
        submitted_at="2024-01-01T00:00:00Z",
    )


class TestIngestion:
    def test_three_valid_rows(self, tmp_path):
        corpus = Corpus()
        n = corpus.ingest_images([_record(f"i{k}", tmp_path) for k in range(3)])
        assert n == 3 and len(corpus) == 3

    def test_duplicate_image_id_names_the_id(self, tmp_path):
        corpus = Corpus()
        rows = [_record("dup", tmp_path), _record("dup", tmp_path)]
        with pytest.raises(DuplicateImageId, match="dup"):
            corpus.ingest_images(rows)

    def test_village_without_township_is_malformed(self, tmp_path):
        with pytest.raises(MalformedGeoPath):
            Corpus().ingest_images([_record("x", tmp_path, township="", village="V1")])

    def test_township_without_village_is_malformed(self, tmp_path):
        with pytest.raises(MalformedGeoPath):
            Corpus().ingest_images([_record("x", tmp_path, township="T1", village="")])

    def test_empty_province_is_malformed(self, tmp_path):
        record = ImageRecord(
            image_id="x", geo=GeoPath(province="", county="C"), pixels_ref=_raster(tmp_path)
        )
        with pytest.raises(MalformedGeoPath):
            Corpus().ingest_images([record])

    def test_missing_raster_rejected(self, tmp_path):
        record = ImageRecord(
            image_id="x", geo=GeoPath(province="P", county="C"), pixels_ref=str(tmp_path / "no.ppm")
        )
        with pytest.raises(UnreadableRaster):
            Corpus().ingest_images([record])


class TestBallots:
    def test_first_ballot_is_one_hot(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        dist = corpus.submit_ballot(_ballot("a", "r1", 7))
        assert dist.n_ballots == 1
        assert dist.p == tuple(1.0 if j == 7 else 0.0 for j in range(1, 11))

    @pytest.mark.parametrize("score", [0, 11, -3])
    def test_score_out_of_range(self, tmp_path, score):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        with pytest.raises(ScoreOutOfRange):
            corpus.submit_ballot(_ballot("a", "r1", score))

    def test_duplicate_rater_image(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        corpus.submit_ballot(_ballot("a", "r1", 5))
        with pytest.raises(DuplicateRaterImage):
            corpus.submit_ballot(_ballot("a", "r1", 6, i=1))

    def test_unknown_image(self):
        with pytest.raises(UnknownImage):
            Corpus().submit_ballot(_ballot("ghost", "r1", 5))


class TestDistribution:
    def test_hand_tally_5566(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        for i, score in enumerate([5, 5, 6, 6]):
            corpus.submit_ballot(_ballot("a", f"r{i}", score, i=i))
        dist = corpus.distribution_of("a")
        assert dist.p[4] == 0.5 and dist.p[5] == 0.5
        assert dist.mean == pytest.approx(5.5, abs=1e-12)
        assert dist.std == pytest.approx(0.5, abs=1e-12)
        assert not dist.qualified

    def test_fifteen_identical_ballots(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        for i in range(15):
            corpus.submit_ballot(_ballot("a", f"r{i}", 8, i=i))
        dist = corpus.distribution_of("a")
        assert dist.mean == 8.0 and dist.std == 0.0 and dist.qualified

    def test_fourteen_ballots_not_qualified(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        for i in range(14):
            corpus.submit_ballot(_ballot("a", f"r{i}", 8, i=i))
        assert not corpus.distribution_of("a").qualified

    def test_no_ballots(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record("a", tmp_path)])
        with pytest.raises(NoBallots):
            corpus.distribution_of("a")

    @given(st.lists(st.integers(min_value=1, max_value=10), min_size=1, max_size=60))
    def test_tally_invariants(self, scores):
        counts = [0] * 10
        for s in scores:
            counts[s - 1] += 1
        dist = ScoreDistribution.from_counts(counts)
        assert abs(sum(dist.p) - 1.0) <= 1e-9
        assert dist.n_ballots == len(scores)
        assert min(scores) <= dist.mean <= max(scores)
        assert 0.0 <= dist.std <= 4.5


class TestQualifiedImages:
    def test_threshold_filter(self, tmp_path):
        corpus = Corpus()
        corpus.ingest_images([_record(i, tmp_path) for i in ("a", "b", "c")])
        counts = {"a": 15, "b": 14, "c": 20}
        i = 0
        for image_id, n in counts.items():
            for k in range(n):
                corpus.submit_ballot(_ballot(image_id, f"r{k}", 5, i=i))
                i += 1
        assert corpus.qualified_images() == ["a", "c"]
        assert corpus.qualified_images(min_raters=1) == ["a", "b", "c"]

    def test_empty_corpus(self):
        assert Corpus().qualified_images() == []


class TestReplay:
    def test_jsonl_round_trip_reproduces_distributions(self, tmp_path, small_synth):
        synth, out = small_synth
        corpus = Corpus(root=out)
        corpus.ingest_images(synth.images)
        for ballot in synth.ballots:
            corpus.submit_ballot(ballot)

        data_dir = tmp_path / "snapshot"
        corpus.export_snapshot(data_dir)
        replayed = load_corpus(data_dir, check_rasters=False)
        assert replayed.image_ids() == corpus.image_ids()
        for image_id in corpus.tallied_images():
            a = corpus.distribution_of(image_id)
            b = replayed.distribution_of(image_id)
            assert a.p == b.p  # bit-for-bit
            assert a.mean == b.mean and a.std == b.std and a.n_ballots == b.n_ballots

    def test_trailing_partial_line_is_dropped(self, tmp_path):
        path = tmp_path / "ballots.jsonl"
        write_ballots_jsonl(path, [_ballot("a", "r1", 5), _ballot("a", "r2", 6, i=1)])
        with open(path, "ab") as fh:
            fh.write(b'{"ballot_id": "b2", "image_id": "a"')  # no newline: torn write
        ballots = read_ballots_jsonl(path)
        assert [b.ballot_id for b in ballots] == ["b0", "b1"]

    def test_images_jsonl_round_trip(self, tmp_path, small_synth):
        synth, _ = small_synth
        path = tmp_path / "images.jsonl"
        write_images_jsonl(path, synth.images)
        from ruralhq.corpus import read_images_jsonl

        assert read_images_jsonl(path) == synth.images
