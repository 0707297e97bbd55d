"""HTTP service for live switch-display annotation.

Serves trials from a manifest, renders the images (computing the
degraded-restored pair on demand and caching it on disk), records the
raters' forced choices to an append-only JSON-lines log, and exports the
merged manifest + judgments as a trial-set document.

The service assigns each rater the least-judged trial they have not yet
judged, with the on-screen left/right placement of the two candidates
randomized per assignment. The placement flag is recorded server-side
and sent to the client, which reports its choice canonically (A meaning
``restoredA``), so the log never depends on screen positions.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .bench import TrialSet, load_manifest
from .degrade import apply_degradation
from .image import load_image, save_image

API_VERSION = 1

_IMAGE_ROLES = ("degraded", "degA", "degB", "restA", "restB")

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".map": "application/json; charset=utf-8",
}

_PLACEHOLDER_PAGE = b"""<!doctype html>
<html><head><title>annotation service</title></head>
<body><h1>Annotation service is running</h1>
<p>No UI bundle is installed. Point --static at a built frontend, or use
the JSON API: GET /api/trial/next?rater=ID, POST /api/judgment,
GET /api/export.</p></body></html>
"""


class AnnotateError(Exception):
    pass


def build_export(trials: TrialSet, log_records: list[dict]) -> str:
    """Deterministic export document: manifest trials plus logged judgments."""
    doc = trials.to_json_dict()
    by_id = {t["id"]: t for t in doc["trials"]}
    for rec in log_records:
        trial = by_id.get(rec["trial_id"])
        if trial is None:
            continue
        trial["judgments"].append({
            "rater_id": rec["rater_id"],
            "choice": rec["choice"],
            "timestamp": rec["received_at"],
            "client_timestamp": rec["timestamp"],
            "toggles": rec.get("toggles", 0),
            "elapsed_ms": rec.get("elapsed_ms", 0),
            "seq": rec["seq"],
        })
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


class AnnotationService:
    """Owns all mutable state; the HTTP handler is a thin shim over it."""

    def __init__(self, manifest_path: str | os.PathLike, image_root: str | os.PathLike,
                 log_path: str | os.PathLike, static_dir: str | os.PathLike | None = None,
                 rng_seed: int | None = None):
        self.trials = load_manifest(manifest_path)  # invalid manifest refuses startup
        self.image_root = Path(image_root)
        self.log_path = Path(log_path)
        self.static_dir = Path(static_dir) if static_dir is not None else None
        self.cache_dir = self.log_path.parent / (self.log_path.stem + "_imgcache")
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._cache_lock = threading.Lock()
        self._rng = random.Random(rng_seed)
        self._assignments: dict[tuple[str, str], bool] = {}  # (rater, trial) -> flip
        self._records: list[dict] = []
        self._dedupe: dict[tuple, int] = {}  # (rater, trial, timestamp) -> seq
        self._log_fh = None
        self._tokens: dict[str, tuple[str, str]] = {}  # token -> (trial_id, role)
        for trial in self.trials.trials:
            for role in _IMAGE_ROLES:
                self._tokens[self._token(trial.id, role)] = (trial.id, role)
        self._load_existing_log()

    # -- log -----------------------------------------------------------

    def _load_existing_log(self) -> None:
        if not self.log_path.exists():
            return
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                self._records.append(rec)
                self._dedupe[(rec["rater_id"], rec["trial_id"],
                              rec["timestamp"])] = rec["seq"]

    def _append_record(self, rec: dict) -> None:
        if self._log_fh is None:
            self._log_fh = open(self.log_path, "a", encoding="utf-8")
        self._log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())
        self._records.append(rec)

    # -- trial assignment ----------------------------------------------

    def _judged_by(self, rater_id: str) -> set[str]:
        done = {rec["trial_id"] for rec in self._records
                if rec["rater_id"] == rater_id}
        for trial in self.trials.trials:
            if any(j.rater_id == rater_id for j in trial.judgments):
                done.add(trial.id)
        return done

    def _judgment_count(self, trial) -> int:
        logged = sum(1 for rec in self._records if rec["trial_id"] == trial.id)
        return len(trial.judgments) + logged

    def next_trial(self, rater_id: str) -> dict:
        with self._lock:
            done = self._judged_by(rater_id)
            candidates = [(self._judgment_count(t), i, t)
                          for i, t in enumerate(self.trials.trials)
                          if t.id not in done]
            if not candidates:
                raise AnnotateError("no trials remaining")
            _, _, trial = min(candidates)
            key = (rater_id, trial.id)
            if key not in self._assignments:
                self._assignments[key] = self._rng.random() < 0.5
            flip = self._assignments[key]
        return {
            "v": API_VERSION,
            "trial_id": trial.id,
            "flip": flip,
            "images": {role: f"/images/{self._token(trial.id, role)}"
                       for role in _IMAGE_ROLES},
        }

    def record_judgment(self, body: dict) -> dict:
        for field_name in ("trial_id", "rater_id", "choice", "timestamp"):
            if field_name not in body:
                raise AnnotateError(f"missing field '{field_name}'")
        trial_id = body["trial_id"]
        if not any(t.id == trial_id for t in self.trials.trials):
            raise AnnotateError("unknown trial")
        if body["choice"] not in ("A", "B"):
            raise AnnotateError("choice must be 'A' or 'B'")
        key = (body["rater_id"], trial_id, body["timestamp"])
        with self._lock:
            if key in self._dedupe:  # idempotent replay
                return {"v": API_VERSION, "seq": self._dedupe[key], "duplicate": True}
            seq = len(self._records)
            rec = {
                "v": API_VERSION,
                "seq": seq,
                "trial_id": trial_id,
                "rater_id": body["rater_id"],
                "choice": body["choice"],
                "toggles": int(body.get("toggles", 0)),
                "elapsed_ms": int(body.get("elapsed_ms", 0)),
                "timestamp": body["timestamp"],
                "received_at": time.time(),
            }
            self._append_record(rec)
            self._dedupe[key] = seq
        return {"v": API_VERSION, "seq": seq}

    def export(self) -> str:
        with self._lock:
            return build_export(self.trials, list(self._records))

    # -- images ----------------------------------------------------------

    def _token(self, trial_id: str, role: str) -> str:
        # bound to the trial's sources and spec so a changed manifest
        # cannot collide with stale cache entries under the same log dir
        trial = self.trials.trial_by_id(trial_id)
        key = "|".join([trial_id, role, trial.spec_text, trial.degraded_path,
                        trial.restoredA_path, trial.restoredB_path])
        digest = hashlib.sha1(key.encode()).hexdigest()[:20]
        return f"{digest}.png"

    def image_bytes(self, token: str) -> bytes:
        if token not in self._tokens:
            raise AnnotateError("unknown image")
        trial_id, role = self._tokens[token]
        cached = self.cache_dir / token
        with self._cache_lock:
            if not cached.exists():
                self._render(trial_id, role, cached)
            return cached.read_bytes()

    def _render(self, trial_id: str, role: str, out_path: Path) -> None:
        trial = self.trials.trial_by_id(trial_id)
        sources = {
            "degraded": trial.degraded_path,
            "degA": trial.restoredA_path,
            "degB": trial.restoredB_path,
            "restA": trial.restoredA_path,
            "restB": trial.restoredB_path,
        }
        img = load_image(self._resolve(sources[role]))
        if role in ("degA", "degB"):
            # same degradation chain and seed as the trial's degraded image
            img = apply_degradation(img, trial.spec_text)
        save_image(img, out_path)

    def _resolve(self, path: str) -> str:
        p = Path(path)
        return str(p if p.is_absolute() else self.image_root / p)

    # -- static UI -------------------------------------------------------

    def static_bytes(self, path: str) -> tuple[bytes, str]:
        name = path.lstrip("/") or "index.html"
        if self.static_dir is None:
            if name == "index.html":
                return _PLACEHOLDER_PAGE, _STATIC_TYPES[".html"]
            raise AnnotateError("unknown path")
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) \
                or not target.is_file():
            raise AnnotateError("unknown path")
        ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
        return target.read_bytes(), ctype


class _Handler(BaseHTTPRequestHandler):
    server_version = "cdiqa-annotate/1"

    @property
    def svc(self) -> AnnotationService:
        return self.server.svc  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, obj: dict, status: int = 200) -> None:
        payload = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_bytes(self, payload: bytes, ctype: str) -> None:
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        url = urlparse(self.path)
        try:
            if url.path == "/api/trial/next":
                rater = parse_qs(url.query).get("rater", [None])[0]
                if not rater:
                    self._send_json({"error": "missing rater"}, 400)
                    return
                try:
                    self._send_json(self.svc.next_trial(rater))
                except AnnotateError as exc:
                    self._send_json({"error": str(exc)}, 404)
            elif url.path == "/api/export":
                payload = self.svc.export().encode()
                self._send_bytes(payload, "application/json")
            elif url.path.startswith("/images/"):
                try:
                    payload = self.svc.image_bytes(url.path.rsplit("/", 1)[1])
                    self._send_bytes(payload, "image/png")
                except AnnotateError as exc:
                    self._send_json({"error": str(exc)}, 404)
            else:
                try:
                    payload, ctype = self.svc.static_bytes(url.path)
                    self._send_bytes(payload, ctype)
                except AnnotateError as exc:
                    self._send_json({"error": str(exc)}, 404)
        except BrokenPipeError:
            pass

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/api/judgment":
            self._send_json({"error": "unknown endpoint"}, 404)
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            body = json.loads(self.rfile.read(length))
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            self._send_json({"error": f"malformed body: {exc}"}, 400)
            return
        try:
            self._send_json(self.svc.record_judgment(body))
        except AnnotateError as exc:
            status = 404 if str(exc) == "unknown trial" else 400
            self._send_json({"error": str(exc)}, status)


class AnnotationServer:
    """ThreadingHTTPServer wrapper with start/stop for embedding in tests."""

    def __init__(self, svc: AnnotationService, port: int = 0, host: str = "127.0.0.1"):
        self.svc = svc
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.svc = svc  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve(manifest: str, image_root: str, port: int, log_path: str,
          static_dir: str | None = None) -> None:
    """Blocking entry point used by the command line."""
    svc = AnnotationService(manifest, image_root, log_path, static_dir)
    server = AnnotationServer(svc, port=port)
    print(f"annotation service on http://127.0.0.1:{server.port}/ "
          f"({len(svc.trials.trials)} trials, log: {log_path})", flush=True)
    try:
        server.httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
