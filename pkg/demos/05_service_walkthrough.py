"""The scoring service over a real socket.

Starts the HTTP backend on a local port, walks the rater loop the browser
UI uses (next image -> submit ballot -> distribution), and reads the
regional aggregates, all with stdlib HTTP clients.
"""

import json
import tempfile
import threading
import time
import urllib.request

import uvicorn

from ruralhq.cli import run
from ruralhq.corpus import load_corpus
from ruralhq.service import ScoringService, create_app

PORT = 8765
BASE = f"http://127.0.0.1:{PORT}"

workdir = tempfile.mkdtemp(prefix="service_demo_")
assert run(["synth", "--seed", "2", "--n", "12", "--raters", "3", "--side", "32",
            "--out", workdir, "--counties", "3"]) == 0

corpus = load_corpus(workdir)
app = create_app(ScoringService(corpus))
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
print(f"service listening on {BASE}")


def get(path):
    with urllib.request.urlopen(BASE + path) as resp:
        return json.loads(resp.read())


def post(path, payload):
    req = urllib.request.Request(
        BASE + path, data=json.dumps(payload).encode(), method="POST",
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


# One rater scores three images; the service always serves the least-scored image.
for k in range(3):
    nxt = get("/api/next?rater=demo")
    print(f"serving {nxt['image_id']} ({nxt['n_ballots']} ballots so far) at {nxt['pixels_url']}")
    ack = post("/api/ballots", {"rater_id": "demo", "image_id": nxt["image_id"], "score": 5 + k})
    print(f"  recorded -> n_ballots={ack['n_ballots']} qualified={ack['qualified']}")

image_id = corpus.image_ids()[0]
for rater in range(4):
    post("/api/ballots", {"rater_id": f"crowd{rater}", "image_id": image_id,
                          "score": [5, 5, 6, 6][rater]})
dist = get(f"/api/images/{image_id}/distribution")
print(f"\n{image_id} distribution: mean={dist['mean']:.2f} std={dist['std']:.2f} n={dist['n_ballots']}")

aggregates = get("/api/aggregates?level=county&min_images=1")
print(f"county aggregates: {[(a['county'], round(a['mean_quality'], 2)) for a in aggregates]}")

png = urllib.request.urlopen(f"{BASE}/images/{image_id}.png").read()
print(f"raster endpoint returned {len(png)} PNG bytes ({png[:4]!r})")

server.should_exit = True
thread.join(timeout=5)
print("service stopped")
