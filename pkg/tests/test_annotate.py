import json
import threading
import urllib.error
import urllib.request

import pytest

from cdiqa.annotate import AnnotationServer, AnnotationService, build_export
from cdiqa.bench import Judgment, Trial, TrialSet, load_manifest, save_manifest
from cdiqa.degrade import apply_degradation
from cdiqa.image import load_image, save_image
from cdiqa.synth import synth_image


def make_manifest(root, n_trials=4, image_size=64):
    trials = []
    for i in range(n_trials):
        ref = synth_image(i, image_size, image_size)
        spec = "blur(sigma=2,size=9)" if i % 2 == 0 else "noise(sigma=30,seed=5)"
        degraded = apply_degradation(ref, spec)
        a = apply_degradation(ref, "noise(sigma=10,seed=1)")
        b = apply_degradation(ref, "blur(sigma=1,size=7)")
        paths = {}
        for name, img in [("deg", degraded), ("a", a), ("b", b)]:
            p = root / f"t{i}_{name}.pgm"
            save_image(img, p)
            paths[name] = p.name
        trials.append(Trial(f"t{i}", paths["deg"], spec, paths["a"], paths["b"]))
    ts = TrialSet(trials)
    manifest_path = root / "manifest.json"
    save_manifest(ts, manifest_path)
    return manifest_path


@pytest.fixture()
def server(tmp_path):
    manifest = make_manifest(tmp_path)
    svc = AnnotationService(manifest, tmp_path, tmp_path / "judgments.jsonl",
                            rng_seed=1234)
    srv = AnnotationServer(svc)
    srv.start()
    yield srv, svc, tmp_path
    srv.stop()


def get_json(srv, path, expect_error=False):
    url = f"http://127.0.0.1:{srv.port}{path}"
    try:
        with urllib.request.urlopen(url) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        if not expect_error:
            raise
        return exc.code, json.loads(exc.read())


def post_json(srv, path, body, expect_error=False):
    url = f"http://127.0.0.1:{srv.port}{path}"
    data = json.dumps(body).encode()
    req = urllib.request.Request(url, data=data,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        if not expect_error:
            raise
        return exc.code, json.loads(exc.read())


def judge(srv, rater, trial_id, choice, ts=None, toggles=3):
    body = {"trial_id": trial_id, "rater_id": rater, "choice": choice,
            "toggles": toggles, "elapsed_ms": 1500,
            "timestamp": ts if ts is not None else f"{rater}-{trial_id}"}
    return post_json(srv, "/api/judgment", body)


class TestTrialPayload:
    def test_payload_contract(self, server):
        srv, _, _ = server
        status, payload = get_json(srv, "/api/trial/next?rater=r1")
        assert status == 200
        assert payload["v"] == 1
        assert isinstance(payload["flip"], bool)
        assert set(payload["images"]) == {"degraded", "degA", "degB", "restA", "restB"}
        for url in payload["images"].values():
            assert url.startswith("/images/")

    def test_missing_rater(self, server):
        srv, _, _ = server
        status, payload = get_json(srv, "/api/trial/next", expect_error=True)
        assert status == 400
        assert "rater" in payload["error"]

    def test_images_served_as_png(self, server):
        srv, svc, root = server
        _, payload = get_json(srv, "/api/trial/next?rater=r1")
        for role, url in payload["images"].items():
            with urllib.request.urlopen(f"http://127.0.0.1:{srv.port}{url}") as resp:
                data = resp.read()
            assert data[:8] == b"\x89PNG\r\n\x1a\n", role

    def test_degraded_restored_computed_with_trial_spec(self, server):
        srv, svc, root = server
        _, payload = get_json(srv, "/api/trial/next?rater=r1")
        trial = svc.trials.trial_by_id(payload["trial_id"])
        url = payload["images"]["degA"]
        with urllib.request.urlopen(f"http://127.0.0.1:{srv.port}{url}"):
            pass  # populates the on-disk cache
        token = url.rsplit("/", 1)[1]
        served = load_image(svc.cache_dir / token)
        expected = apply_degradation(load_image(root / trial.restoredA_path),
                                     trial.spec_text)
        # PNG round-trip quantizes to 8 bits
        assert abs(served.data - expected.data).max() <= 1.0 / 255.0 + 1e-12

    def test_tokens_hide_sources(self, server):
        srv, _, _ = server
        _, payload = get_json(srv, "/api/trial/next?rater=r1")
        for url in payload["images"].values():
            name = url.rsplit("/", 1)[1]
            assert name.endswith(".png") and len(name) == 24
            for hint in ("ref", "cand", "rest", "deg", "A", "B"):
                assert hint not in name.split(".")[0]


class TestJudgments:
    def test_ack_and_sequence(self, server):
        srv, _, _ = server
        status, ack = judge(srv, "r1", "t0", "A")
        assert status == 200 and ack["seq"] == 0
        status, ack = judge(srv, "r1", "t1", "B")
        assert ack["seq"] == 1

    def test_unknown_trial_404_body(self, server):
        srv, _, _ = server
        body = {"trial_id": "nope", "rater_id": "r1", "choice": "A",
                "toggles": 0, "elapsed_ms": 0, "timestamp": 1}
        status, payload = post_json(srv, "/api/judgment", body, expect_error=True)
        assert status == 404
        assert payload == {"error": "unknown trial"}

    def test_malformed_body(self, server):
        srv, _, _ = server
        url = f"http://127.0.0.1:{srv.port}/api/judgment"
        req = urllib.request.Request(url, data=b"not json",
                                     headers={"Content-Type": "application/json"})
        with pytest.raises(urllib.error.HTTPError) as exc:
            urllib.request.urlopen(req)
        assert exc.value.code == 400

    def test_duplicate_replay_single_entry(self, server):
        srv, svc, root = server
        judge(srv, "r1", "t0", "A", ts=777)
        status, ack = judge(srv, "r1", "t0", "A", ts=777)
        assert ack.get("duplicate") is True
        log_lines = (root / "judgments.jsonl").read_text().strip().splitlines()
        assert len(log_lines) == 1

    def test_durable_log_lines(self, server):
        srv, _, root = server
        judge(srv, "r1", "t0", "A")
        judge(srv, "r2", "t1", "B")
        lines = (root / "judgments.jsonl").read_text().strip().splitlines()
        records = [json.loads(l) for l in lines]
        assert [r["seq"] for r in records] == [0, 1]
        assert records[0]["choice"] == "A" and records[1]["choice"] == "B"

    def test_concurrent_submissions(self, server):
        srv, _, root = server
        errors = []

        def submit(rater):
            try:
                for t in range(4):
                    judge(srv, rater, f"t{t}", "A" if t % 2 else "B")
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=submit, args=(f"r{i}",)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        lines = (root / "judgments.jsonl").read_text().strip().splitlines()
        assert len(lines) == 32
        seqs = sorted(json.loads(l)["seq"] for l in lines)
        assert seqs == list(range(32))


class TestAssignment:
    def test_least_judged_interleaving(self, server):
        # two raters alternating: every trial reaches 2 judgments before
        # any trial gets a third
        srv, _, _ = server
        counts = {f"t{i}": 0 for i in range(4)}
        for round_idx in range(4):
            for rater in ("alice", "bob"):
                _, payload = get_json(srv, f"/api/trial/next?rater={rater}")
                tid = payload["trial_id"]
                judge(srv, rater, tid, "A")
                counts[tid] += 1
            if round_idx == 3:
                assert set(counts.values()) == {2}
            assert max(counts.values()) - min(counts.values()) <= 1

    def test_exhausted_rater(self, tmp_path):
        manifest = make_manifest(tmp_path, n_trials=1)
        svc = AnnotationService(manifest, tmp_path, tmp_path / "j.jsonl")
        srv = AnnotationServer(svc)
        srv.start()
        try:
            _, payload = get_json(srv, "/api/trial/next?rater=solo")
            judge(srv, "solo", payload["trial_id"], "A")
            status, payload = get_json(srv, "/api/trial/next?rater=solo",
                                       expect_error=True)
            assert status == 404
            assert payload == {"error": "no trials remaining"}
        finally:
            srv.stop()

    def test_flip_stable_per_assignment(self, server):
        srv, _, _ = server
        _, p1 = get_json(srv, "/api/trial/next?rater=r9")
        _, p2 = get_json(srv, "/api/trial/next?rater=r9")
        assert p1["trial_id"] == p2["trial_id"]
        assert p1["flip"] == p2["flip"]

    def test_manifest_judgments_count_toward_policy(self, tmp_path):
        manifest_path = make_manifest(tmp_path, n_trials=2)
        ts = load_manifest(manifest_path)
        ts.trials[0].judgments.append(Judgment("earlier", "A", 1.0))
        save_manifest(ts, manifest_path)
        svc = AnnotationService(manifest_path, tmp_path, tmp_path / "j.jsonl")
        srv = AnnotationServer(svc)
        srv.start()
        try:
            _, payload = get_json(srv, "/api/trial/next?rater=new")
            assert payload["trial_id"] == "t1"  # t0 already has one judgment
        finally:
            srv.stop()


class TestExport:
    def test_export_counts(self, server):
        srv, _, _ = server
        judge(srv, "r1", "t0", "A")
        judge(srv, "r2", "t0", "B")
        judge(srv, "r1", "t1", "A")
        _, doc = get_json(srv, "/api/export")
        total = sum(len(t["judgments"]) for t in doc["trials"])
        assert total == 3
        t0 = next(t for t in doc["trials"] if t["id"] == "t0")
        assert [j["choice"] for j in t0["judgments"]] == ["A", "B"]
        assert all(j["toggles"] == 3 for j in t0["judgments"])

    def test_export_equals_manifest_plus_log(self, server):
        srv, svc, root = server
        judge(srv, "r1", "t0", "A")
        judge(srv, "r2", "t1", "B")
        url = f"http://127.0.0.1:{srv.port}/api/export"
        with urllib.request.urlopen(url) as resp:
            served = resp.read().decode()
        log_records = [json.loads(l) for l in
                       (root / "judgments.jsonl").read_text().strip().splitlines()]
        replayed = build_export(load_manifest(root / "manifest.json"), log_records)
        assert served == replayed

    def test_canonical_choice_despite_flip(self, server):
        # the scripted client always picks the LEFT panel on screen and
        # maps it through the flip flag before posting
        srv, svc, _ = server
        seen = {}
        for rater in ("u1", "u2", "u3", "u4"):
            _, payload = get_json(srv, f"/api/trial/next?rater={rater}")
            flip = payload["flip"]
            canonical = "B" if flip else "A"  # left panel is B when flipped
            judge(srv, rater, payload["trial_id"], canonical)
            seen[(rater, payload["trial_id"])] = canonical
        _, doc = get_json(srv, "/api/export")
        for trial in doc["trials"]:
            for j in trial["judgments"]:
                assert j["choice"] == seen[(j["rater_id"], trial["id"])]
        flips = {svc._assignments[k] for k in seen}
        assert flips == {True, False}  # both permutations occurred


class TestStartup:
    def test_invalid_manifest_refuses_start(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"v": 1, "trials": [{"id": "t0"}]}')
        with pytest.raises(Exception, match="degraded_path"):
            AnnotationService(bad, tmp_path, tmp_path / "j.jsonl")

    def test_log_resume_continues_sequence(self, tmp_path):
        manifest = make_manifest(tmp_path, n_trials=2)
        log = tmp_path / "j.jsonl"
        svc1 = AnnotationService(manifest, tmp_path, log)
        svc1.record_judgment({"trial_id": "t0", "rater_id": "r1", "choice": "A",
                              "timestamp": 1})
        svc2 = AnnotationService(manifest, tmp_path, log)
        ack = svc2.record_judgment({"trial_id": "t1", "rater_id": "r1", "choice": "B",
                                    "timestamp": 2})
        assert ack["seq"] == 1
        dup = svc2.record_judgment({"trial_id": "t0", "rater_id": "r1", "choice": "A",
                                    "timestamp": 1})
        assert dup["duplicate"] is True

    def test_placeholder_page_without_static(self, server):
        srv, _, _ = server
        with urllib.request.urlopen(f"http://127.0.0.1:{srv.port}/") as resp:
            body = resp.read()
        assert b"Annotation service is running" in body
