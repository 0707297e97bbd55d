"""Scripted annotation session against a live service instance.

Starts the annotation server on an ephemeral port, plays a rater that
toggles the switch display a few times and always picks the on-screen
left candidate (mapping it back to the canonical A/B label through the
server's placement flag), then prints the export.
"""

import json
import tempfile
import urllib.request
from pathlib import Path

from cdiqa.annotate import AnnotationServer, AnnotationService
from cdiqa.bench import make_fixture_trials


def get(port, path):
    with urllib.request.urlopen(f"http://127.0.0.1:{port}{path}") as resp:
        return json.loads(resp.read())


def post(port, path, body):
    req = urllib.request.Request(
        f"http://127.0.0.1:{port}{path}", data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def main():
    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        make_fixture_trials(d, n_images=1)  # 5 trials
        svc = AnnotationService(d / "trials.json", d, d / "judgments.jsonl")
        server = AnnotationServer(svc)
        server.start()
        port = server.port
        print(f"service on port {port}, {len(svc.trials.trials)} trials\n")
        try:
            for step in range(4):
                payload = get(port, "/api/trial/next?rater=demo")
                flip = payload["flip"]
                left_label = "B" if flip else "A"
                toggles = 2 + step % 2
                print(f"trial {payload['trial_id']}: left shows {left_label}, "
                      f"{toggles} toggles, rater picks left -> records {left_label}")
                post(port, "/api/judgment", {
                    "trial_id": payload["trial_id"], "rater_id": "demo",
                    "choice": left_label, "toggles": toggles,
                    "elapsed_ms": 2500, "timestamp": step,
                })
            export = get(port, "/api/export")
            judged = [(t["id"], [j["choice"] for j in t["judgments"]])
                      for t in export["trials"] if t["judgments"]]
            print(f"\nexport: {judged}")
        finally:
            server.stop()


if __name__ == "__main__":
    main()
