"""2AFC benchmark harness over switch-display comparison trials.

A trial set pairs each degraded image with two candidate restorations
(A and B) plus the recorded forced-choice judgments of human raters.
Metrics are scored by agreement with those judgments, following the
usual 2AFC convention: a metric earns the fraction of raters it agrees
with on each trial, averaged over trials.

The manifest is a versioned JSON document; unknown fields are preserved
on round-trip so downstream tools can annotate trials freely.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cdi import DEFAULT_LAMBDA, DEFAULT_LEVELS, rgcdi_psnr
from .degrade import (
    apply_degradation,
    conv2_reflect,
    deg_psnr,
    default_blur_size,
    gaussian_kernel,
    parse_degradation,
)
from .image import ImageBuffer, load_image, psnr, save_image, ssim, to_luma
from .racdi import identity_predictor, racdi_psnr
from .synth import scrambled_detail_restoration, synth_image

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1

METRICS = ("psnr", "ssim", "deg_psnr", "rgcdi", "racdi")

#: metrics that compare against the reference image
_NEEDS_REF = {"psnr", "ssim", "rgcdi"}


class BenchError(Exception):
    """Raised for malformed manifests or unusable benchmark inputs."""


class ManifestError(BenchError):
    """Schema violation; carries the JSON-pointer path of the offender."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{message} at {pointer}")


# ---------------------------------------------------------------------------
# Trial data model
# ---------------------------------------------------------------------------

@dataclass
class Judgment:
    rater_id: str
    choice: str  # "A" or "B", canonical
    timestamp: float | str
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = dict(self.extra)
        d.update(rater_id=self.rater_id, choice=self.choice, timestamp=self.timestamp)
        return d


@dataclass
class Trial:
    id: str
    degraded_path: str
    spec_text: str
    restoredA_path: str
    restoredB_path: str
    ref_path: str | None = None
    judgments: list[Judgment] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = dict(self.extra)
        d.update(
            id=self.id,
            degraded_path=self.degraded_path,
            spec_text=self.spec_text,
            restoredA_path=self.restoredA_path,
            restoredB_path=self.restoredB_path,
            judgments=[j.to_json_dict() for j in self.judgments],
        )
        if self.ref_path is not None:
            d["ref_path"] = self.ref_path
        return d


@dataclass
class TrialSet:
    trials: list[Trial]
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = dict(self.extra)
        d.update(v=MANIFEST_VERSION, trials=[t.to_json_dict() for t in self.trials])
        return d

    def trial_by_id(self, trial_id: str) -> Trial:
        for t in self.trials:
            if t.id == trial_id:
                return t
        raise BenchError(f"unknown trial '{trial_id}'")


def _want(obj: dict, key: str, types, pointer: str):
    if key not in obj:
        raise ManifestError(f"{pointer}/{key}", "missing required field")
    value = obj[key]
    if not isinstance(value, types):
        raise ManifestError(f"{pointer}/{key}",
                            f"expected {types}, got {type(value).__name__}")
    return value


def _parse_judgment(raw: dict, pointer: str) -> Judgment:
    if not isinstance(raw, dict):
        raise ManifestError(pointer, "judgment must be an object")
    rater = _want(raw, "rater_id", str, pointer)
    choice = _want(raw, "choice", str, pointer)
    if choice not in ("A", "B"):
        raise ManifestError(f"{pointer}/choice", "choice must be 'A' or 'B'")
    ts = _want(raw, "timestamp", (str, int, float), pointer)
    extra = {k: v for k, v in raw.items()
             if k not in ("rater_id", "choice", "timestamp")}
    return Judgment(rater, choice, ts, extra)


def _parse_trial(raw: dict, pointer: str) -> Trial:
    if not isinstance(raw, dict):
        raise ManifestError(pointer, "trial must be an object")
    tid = _want(raw, "id", str, pointer)
    degraded = _want(raw, "degraded_path", str, pointer)
    spec_text = _want(raw, "spec_text", str, pointer)
    try:
        parse_degradation(spec_text)
    except Exception as exc:
        raise ManifestError(f"{pointer}/spec_text", str(exc)) from exc
    ra = _want(raw, "restoredA_path", str, pointer)
    rb = _want(raw, "restoredB_path", str, pointer)
    ref = raw.get("ref_path")
    if ref is not None and not isinstance(ref, str):
        raise ManifestError(f"{pointer}/ref_path", "ref_path must be a string")
    judgments_raw = raw.get("judgments", [])
    if not isinstance(judgments_raw, list):
        raise ManifestError(f"{pointer}/judgments", "judgments must be a list")
    judgments = [_parse_judgment(j, f"{pointer}/judgments/{i}")
                 for i, j in enumerate(judgments_raw)]
    known = {"id", "degraded_path", "spec_text", "restoredA_path",
             "restoredB_path", "ref_path", "judgments"}
    extra = {k: v for k, v in raw.items() if k not in known}
    return Trial(tid, degraded, spec_text, ra, rb, ref, judgments, extra)


def trialset_from_json_dict(raw: dict) -> TrialSet:
    if not isinstance(raw, dict):
        raise ManifestError("", "manifest must be an object")
    version = _want(raw, "v", int, "")
    if version != MANIFEST_VERSION:
        raise ManifestError("/v", f"unsupported manifest version {version}")
    trials_raw = _want(raw, "trials", list, "")
    trials = [_parse_trial(t, f"/trials/{i}") for i, t in enumerate(trials_raw)]
    seen = set()
    for i, t in enumerate(trials):
        if t.id in seen:
            raise ManifestError(f"/trials/{i}/id", f"duplicate trial id '{t.id}'")
        seen.add(t.id)
    extra = {k: v for k, v in raw.items() if k not in ("v", "trials")}
    return TrialSet(trials, extra)


def load_manifest(path: str | os.PathLike) -> TrialSet:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError("", f"invalid JSON: {exc}") from exc
    return trialset_from_json_dict(raw)


def save_manifest(ts: TrialSet, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_manifest(ts))


def dump_manifest(ts: TrialSet) -> str:
    """Canonical serialization (sorted keys, 2-space indent, trailing \\n)."""
    return json.dumps(ts.to_json_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# 2AFC scoring
# ---------------------------------------------------------------------------

def human_2afc(p: float) -> float:
    """Agreement score of a rater pool split p : (1-p) between candidates.

    Computes p^2 + (1-p)^2 via the equivalent 1 - 2p(1-p), which is
    manifestly symmetric and exact at the worked-example points.
    """
    if not (0.0 <= p <= 1.0):
        raise BenchError(f"preference fraction must be in [0, 1], got {p}")
    return 1.0 - 2.0 * p * (1.0 - p)


def _resolve(root: Path | None, path: str) -> str:
    p = Path(path)
    if root is not None and not p.is_absolute():
        return str(root / p)
    return str(p)


def _score_candidate(metric: str, ref, degraded, candidate, spec_text,
                     lam, levels, predictor) -> float:
    if metric == "psnr":
        return psnr(ref, candidate)
    if metric == "ssim":
        return ssim(to_luma(ref), to_luma(candidate))
    if metric == "deg_psnr":
        return deg_psnr(candidate, degraded, spec_text)
    if metric == "rgcdi":
        return rgcdi_psnr(ref, degraded, candidate, lam, levels).rgcdi_psnr
    if metric == "racdi":
        return racdi_psnr(degraded, candidate, predictor, lam, levels)
    raise BenchError(f"unknown metric '{metric}' (want one of {METRICS})")


def metric_2afc(trials: TrialSet, metric: str, *, image_root: str | os.PathLike | None = None,
                lam: float = DEFAULT_LAMBDA, levels: int = DEFAULT_LEVELS,
                predictor=None, max_workers: int = 1) -> float:
    """Mean 2AFC agreement of a metric with the recorded judgments.

    Per trial the metric prefers the candidate it scores higher (exact
    ties contribute 0.5); the trial contributes the fraction of raters
    that chose the same candidate. Trials without judgments are skipped
    with a warning.
    """
    if metric not in METRICS:
        raise BenchError(f"unknown metric '{metric}' (want one of {METRICS})")
    if predictor is None:
        predictor = identity_predictor
    root = Path(os.fspath(image_root)) if image_root is not None else None

    judged = [t for t in trials.trials if t.judgments]
    for t in trials.trials:
        if not t.judgments:
            log.warning("trial %s has no judgments; skipped", t.id)
    if not judged:
        raise BenchError("no judged trials to score")

    def contribution(trial: Trial) -> float:
        if metric in _NEEDS_REF and trial.ref_path is None:
            raise BenchError(f"metric '{metric}' needs ref_path on trial '{trial.id}'")
        degraded = load_image(_resolve(root, trial.degraded_path))
        ref = (load_image(_resolve(root, trial.ref_path))
               if trial.ref_path is not None else None)
        cand_a = load_image(_resolve(root, trial.restoredA_path))
        cand_b = load_image(_resolve(root, trial.restoredB_path))
        score_a = _score_candidate(metric, ref, degraded, cand_a,
                                   trial.spec_text, lam, levels, predictor)
        score_b = _score_candidate(metric, ref, degraded, cand_b,
                                   trial.spec_text, lam, levels, predictor)
        p = sum(1 for j in trial.judgments if j.choice == "A") / len(trial.judgments)
        if score_a == score_b:
            return 0.5
        return p if score_a > score_b else 1.0 - p

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(contribution, judged))
    else:
        values = [contribution(t) for t in judged]
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# Blur sweep (robustness of metrics to post-blur)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    sigma: float
    metric: str
    raw: float
    normalized: float


def blur_sweep(ref_path: str, degraded_path: str, restored_path: str,
               spec_text: str, sigmas: list[float],
               lam: float = DEFAULT_LAMBDA, levels: int = DEFAULT_LEVELS,
               ) -> list[SweepRow]:
    """Score blurred copies of the restored image, normalized at sigma=0.

    Re-blurring a restoration should not change how consistent it is with
    the degraded image, so a fidelity metric should stay flat here even
    while reference-similarity metrics drift.
    """
    if not any(s == 0.0 for s in sigmas):
        raise BenchError("sigma sweep must include 0 (the normalization anchor)")
    if any(s < 0 for s in sigmas):
        raise BenchError("sigma values must be >= 0")
    ref = load_image(ref_path)
    degraded = load_image(degraded_path)
    restored = load_image(restored_path)
    parse_degradation(spec_text)

    def scores(img: ImageBuffer) -> dict[str, float]:
        return {
            "psnr": psnr(ref, img),
            "ssim": ssim(to_luma(ref), to_luma(img)),
            "rgcdi": rgcdi_psnr(ref, degraded, img, lam, levels).rgcdi_psnr,
        }

    anchor = scores(restored)
    rows: list[SweepRow] = []
    for sigma in sigmas:
        if sigma == 0.0:
            current = anchor
        else:
            kernel = gaussian_kernel(sigma, default_blur_size(sigma))
            blurred = ImageBuffer(np.stack(
                [conv2_reflect(p, kernel) for p in restored.data]))
            current = scores(blurred)
        for name in ("psnr", "ssim", "rgcdi"):
            rows.append(SweepRow(sigma, name, current[name],
                                 current[name] / anchor[name]))
    return rows


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    lines = ["sigma,metric,raw,normalized"]
    for r in rows:
        lines.append(f"{r.sigma:.6f},{r.metric},{r.raw:.6f},{r.normalized:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Synthetic fixture suite
# ---------------------------------------------------------------------------

#: degradations exercised by the fixture trials
FIXTURE_SPECS = (
    "blur(sigma=3,size=19)",
    "down(factor=4)",
    "noise(sigma=50,seed=7)",
    "jpeg(qf=10)",
    "blur(sigma=2,size=13)|down(factor=2)|noise(sigma=25,seed=3)",
)

#: degradations where re-degradation PSNR is a sound consistency proxy
_LOW_NOISE_SPECS = ("blur(sigma=3,size=19)", "down(factor=4)",
                    "blur(sigma=2,size=13)|down(factor=2)|noise(sigma=25,seed=3)")


def make_fixture_trials(out_dir: str | os.PathLike, n_images: int = 4,
                        image_size: int = 128, seed: int = 0) -> TrialSet:
    """Build the synthetic 2AFC fixture suite under ``out_dir``.

    Candidate A keeps the reference's coarse structure with invented
    (phase-scrambled) fine detail — consistent with the degraded image.
    Candidate B is an over-blurred reference: close to the reference in
    pixel terms yet visibly inconsistent once re-degraded. Simulated
    raters prefer the consistent candidate (4/5 or 5/5 votes); on the
    low-noise degradations that preference is verified against the
    re-degradation PSNR of the two candidates.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trials: list[Trial] = []
    smooth_kernel = gaussian_kernel(3.0, 19)
    index = 0
    for img_idx in range(n_images):
        ref = synth_image(seed + 50 + img_idx, image_size, image_size)
        ref_path = out / f"ref_{img_idx}.pgm"
        save_image(ref, ref_path)
        consistent = scrambled_detail_restoration(ref, seed + 500 + img_idx,
                                                  scramble_levels=2)
        oversmoothed = ImageBuffer(np.stack(
            [conv2_reflect(p, smooth_kernel) for p in ref.data]))
        for spec_text in FIXTURE_SPECS:
            degraded = apply_degradation(ref, spec_text)
            deg_path = out / f"trial_{index:03d}_degraded.pgm"
            a_path = out / f"trial_{index:03d}_candA.pgm"
            b_path = out / f"trial_{index:03d}_candB.pgm"
            save_image(degraded, deg_path)
            save_image(consistent, a_path)
            save_image(oversmoothed, b_path)
            if spec_text in _LOW_NOISE_SPECS:
                margin = (deg_psnr(consistent, degraded, spec_text)
                          - deg_psnr(oversmoothed, degraded, spec_text))
                if margin <= 0:
                    raise BenchError(
                        f"fixture construction failed: consistent candidate does "
                        f"not win re-degradation PSNR for {spec_text}")
            n_pro = 5 if index % 5 < 3 else 4  # 5/5 or 4/5 raters for A
            judgments = [Judgment(f"r{k + 1}", "A" if k < n_pro else "B",
                                  float(1000 + index * 10 + k))
                         for k in range(5)]
            trials.append(Trial(
                id=f"t{index:03d}",
                degraded_path=deg_path.name,
                spec_text=spec_text,
                restoredA_path=a_path.name,
                restoredB_path=b_path.name,
                ref_path=ref_path.name,
                judgments=judgments,
            ))
            index += 1
    ts = TrialSet(trials)
    save_manifest(ts, out / "trials.json")
    return ts
