import json
import threading

import pytest
from fastapi.testclient import TestClient

from ruralhq.corpus import Corpus, ScoreBallot, load_corpus
from ruralhq.errors import NothingLeft
from ruralhq.nn import build_network, save_checkpoint, tiny_spec
from ruralhq.service import ScoringService, create_app
from ruralhq.synth import generate_synthetic_corpus


@pytest.fixture()
def service(tmp_path):
    synth = generate_synthetic_corpus(
        seed=9, n_images=6, raters_per_image=2, side=16, out_dir=tmp_path, n_counties=2
    )
    corpus = Corpus(root=tmp_path)
    corpus.ingest_images(synth.images)
    return ScoringService(corpus)


@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


class TestNextImage:
    def test_fewest_ballots_first(self, service):
        ids = service.corpus.image_ids()
        service.record_ballot("seed0", ids[0], 5)
        service.record_ballot("seed1", ids[0], 6)
        service.record_ballot("seed2", ids[1], 4)
        picked = service.next_image_for("fresh")
        assert picked["image_id"] == ids[2]  # zero ballots beats 1 and 2
        assert picked["n_ballots"] == 0
        assert picked["pixels_url"] == f"/images/{ids[2]}.png"

    def test_lexicographic_tie_break(self, service):
        picked = service.next_image_for("fresh")
        assert picked["image_id"] == min(service.corpus.image_ids())

    def test_scored_images_never_reappear(self, service):
        ids = service.corpus.image_ids()
        seen = []
        for _ in ids:
            picked = service.next_image_for("r")
            seen.append(picked["image_id"])
            service.record_ballot("r", picked["image_id"], 5)
        assert sorted(seen) == ids
        with pytest.raises(NothingLeft):
            service.next_image_for("r")

    def test_nothing_left_is_404(self, client, service):
        for image_id in service.corpus.image_ids():
            service.record_ballot("r", image_id, 5)
        resp = client.get("/api/next", params={"rater": "r"})
        assert resp.status_code == 404
        assert resp.json()["code"] == "nothing_left"


class TestBallotEndpoint:
    def test_happy_path(self, client, service):
        image_id = service.corpus.image_ids()[0]
        resp = client.post(
            "/api/ballots", json={"rater_id": "r", "image_id": image_id, "score": 7}
        )
        assert resp.status_code == 200
        assert resp.json() == {"n_ballots": 1, "qualified": False}

    def test_unknown_image_404(self, client):
        resp = client.post(
            "/api/ballots", json={"rater_id": "r", "image_id": "ghost", "score": 7}
        )
        assert resp.status_code == 404 and resp.json()["code"] == "unknown_image"

    def test_out_of_range_422(self, client, service):
        image_id = service.corpus.image_ids()[0]
        for score in (0, 11):
            resp = client.post(
                "/api/ballots", json={"rater_id": "r2", "image_id": image_id, "score": score}
            )
            assert resp.status_code == 422
            assert resp.json()["code"] == "score_out_of_range"

    def test_duplicate_409(self, client, service):
        image_id = service.corpus.image_ids()[0]
        body = {"rater_id": "r", "image_id": image_id, "score": 5}
        assert client.post("/api/ballots", json=body).status_code == 200
        resp = client.post("/api/ballots", json=body)
        assert resp.status_code == 409 and resp.json()["code"] == "duplicate_ballot"

    def test_qualified_flips_at_15(self, client, service):
        image_id = service.corpus.image_ids()[0]
        for k in range(15):
            resp = client.post(
                "/api/ballots", json={"rater_id": f"r{k}", "image_id": image_id, "score": 8}
            )
            payload = resp.json()
            assert payload["qualified"] is (k == 14)
            assert payload["n_ballots"] == k + 1


class TestDistributionEndpoint:
    def test_distribution_roundtrip(self, client, service):
        image_id = service.corpus.image_ids()[0]
        for k, score in enumerate([5, 5, 6, 6]):
            service.record_ballot(f"r{k}", image_id, score)
        resp = client.get(f"/api/images/{image_id}/distribution")
        body = resp.json()
        assert body["mean"] == pytest.approx(5.5)
        assert body["std"] == pytest.approx(0.5)
        assert body["n_ballots"] == 4
        assert body["p"][4] == 0.5 and body["p"][5] == 0.5

    def test_no_ballots_404(self, client, service):
        image_id = service.corpus.image_ids()[0]
        resp = client.get(f"/api/images/{image_id}/distribution")
        assert resp.status_code == 404 and resp.json()["code"] == "no_ballots"


class TestAggregatesEndpoint:
    def test_county_aggregates(self, client, service):
        for image_id in service.corpus.image_ids():
            service.record_ballot("r", image_id, 6)
        resp = client.get("/api/aggregates", params={"level": "county"})
        rows = resp.json()
        assert rows and all(row["level"] == "county" for row in rows)
        assert sum(row["n_images"] for row in rows) == len(service.corpus)

    def test_bad_level(self, client):
        resp = client.get("/api/aggregates", params={"level": "continent"})
        assert resp.status_code == 422


class TestImageAndPredict:
    def test_png_bytes(self, client, service):
        image_id = service.corpus.image_ids()[0]
        resp = client.get(f"/images/{image_id}.png")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_predict_without_checkpoint_503(self, client, service):
        image_id = service.corpus.image_ids()[0]
        resp = client.get(f"/api/predict/{image_id}")
        assert resp.status_code == 503 and resp.json()["code"] == "no_checkpoint"

    def test_predict_with_checkpoint(self, tmp_path, service):
        spec = tiny_spec(input_side=16)
        params = build_network(spec, seed=1)
        ckpt = tmp_path / "m.ckpt"
        save_checkpoint(params, spec, ckpt)
        service.checkpoint_path = str(ckpt)
        client = TestClient(create_app(service))
        image_id = service.corpus.image_ids()[0]
        resp = client.get(f"/api/predict/{image_id}")
        assert resp.status_code == 200
        body = resp.json()
        assert sum(body["p"]) == pytest.approx(1.0, abs=1e-6)
        assert 1.0 <= body["mean"] <= 10.0


class TestSnapshotAndDurability:
    def test_export_then_replay_identical(self, service, tmp_path):
        ids = service.corpus.image_ids()
        for k, image_id in enumerate(ids):
            for r in range(k + 1):
                service.record_ballot(f"r{r}", image_id, 1 + (k + r) % 10)
        out = tmp_path / "snap"
        n_images, n_ballots = service.export_snapshot(out)
        assert n_images == len(ids)
        replayed = load_corpus(out, check_rasters=False)
        for image_id in ids:
            assert replayed.distribution_of(image_id).p == service.corpus.distribution_of(image_id).p

    def test_export_empty_corpus(self, tmp_path):
        service = ScoringService(Corpus())
        out = tmp_path / "snap"
        assert service.export_snapshot(out) == (0, 0)
        assert (out / "images.jsonl").read_bytes() == b""
        assert (out / "ballots.jsonl").read_bytes() == b""

    def test_attached_log_appends_and_replays(self, tmp_path, service):
        log_path = tmp_path / "ballots.jsonl"
        service.corpus.attach_log(log_path)
        ids = service.corpus.image_ids()
        service.record_ballot("r1", ids[0], 5)
        service.record_ballot("r2", ids[0], 6)
        first = log_path.read_bytes()
        service.record_ballot("r3", ids[1], 7)
        after = log_path.read_bytes()
        assert after.startswith(first)  # append-only: old bytes never mutated
        lines = [json.loads(line) for line in after.decode().splitlines()]
        assert [l["rater_id"] for l in lines] == ["r1", "r2", "r3"]

    def test_snapshot_under_concurrent_writes_is_prefix(self, tmp_path, service):
        """Exports taken while a writer thread runs are consistent prefixes."""
        ids = service.corpus.image_ids()
        stop = threading.Event()
        errors = []

        def writer():
            k = 0
            while not stop.is_set() and k < 400:
                try:
                    service.record_ballot(f"w{k}", ids[k % len(ids)], 1 + k % 10)
                except Exception as exc:  # pragma: no cover
                    errors.append(exc)
                    return
                k += 1

        thread = threading.Thread(target=writer)
        thread.start()
        snapshots = []
        for i in range(3):
            out = tmp_path / f"snap{i}"
            service.export_snapshot(out)
            snapshots.append(out)
        stop.set()
        thread.join()
        assert not errors
        final = [b.ballot_id for b in service.corpus.ballots()]
        for out in snapshots:
            from ruralhq.corpus import read_ballots_jsonl

            exported = [b.ballot_id for b in read_ballots_jsonl(out / "ballots.jsonl")]
            assert exported == final[: len(exported)]  # a consistent prefix
            replayed = load_corpus(out, check_rasters=False)
            for image_id in replayed.tallied_images():
                assert sum(replayed.distribution_of(image_id).p) == pytest.approx(1.0, abs=1e-9)
