"""Reference-agnostic consistency scoring.

The reference-guided pipeline turns (reference, degraded) into a pixel
domain "attenuated reference" — a denoised, information-equivalent
rendering of the degraded image. Anything that can predict that image
from the degraded image alone makes the score reference free: score a
restored image by adaptively attenuating its subbands toward the
prediction and comparing in the pixel domain.

Training such a predictor is out of scope here; this module defines the
predictor contract, ships the built-ins (identity, file-backed lookup,
reference-guided oracle) and generates (degraded, attenuated-reference)
training pairs for an external model.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .cdi import DEFAULT_LAMBDA, DEFAULT_LEVELS, rgcdi_attenuated_image, score_against_attenuated
from .degrade import apply_degradation, parse_degradation, resize_bicubic
from .image import ImageBuffer, load_image, save_image, to_luma

MANIFEST_VERSION = 1


class PredictorError(Exception):
    """Raised when an attenuation predictor cannot produce a prediction."""


class AttenuationPredictor(Protocol):
    """Maps a (luma, full-resolution) degraded image to the predicted
    attenuated reference with the same dimensions."""

    def __call__(self, degraded: ImageBuffer) -> ImageBuffer: ...


def identity_predictor(degraded: ImageBuffer) -> ImageBuffer:
    """Baseline predictor: the degraded image is its own prediction.

    Adequate for low-noise degradations (blur, downsampling) where the
    attenuated reference nearly equals the degraded image; poor whenever
    noise must be removed.
    """
    return degraded


def _content_key(img: ImageBuffer) -> str:
    return hashlib.sha256(img.data.tobytes()).hexdigest()


def predictor_from_files(mapping: dict[str, str]) -> AttenuationPredictor:
    """Predictor backed by precomputed files (degraded path -> predicted path).

    Lookup is by image content, so callers may pass buffers loaded from
    the mapped files or re-encoded copies with identical samples.
    """
    table: dict[str, str] = {}
    for degraded_path, predicted_path in mapping.items():
        table[_content_key(load_image(degraded_path))] = predicted_path
        table[_content_key(to_luma(load_image(degraded_path)))] = predicted_path

    def predict(degraded: ImageBuffer) -> ImageBuffer:
        key = _content_key(degraded)
        if key not in table:
            raise PredictorError("no prediction available for the given degraded image")
        return to_luma(load_image(table[key]))

    return predict


def rgcdi_oracle_predictor(ref: ImageBuffer, lam: float = DEFAULT_LAMBDA,
                           levels: int = DEFAULT_LEVELS) -> AttenuationPredictor:
    """Cheating predictor that runs the reference-guided attenuation.

    Useful as the upper-bound oracle in evaluations: it reproduces the
    reference-guided score exactly.
    """

    def predict(degraded: ImageBuffer) -> ImageBuffer:
        return rgcdi_attenuated_image(ref, degraded, lam, levels)

    return predict


def racdi_psnr(degraded: ImageBuffer, restored: ImageBuffer,
               predictor: AttenuationPredictor, lam: float = DEFAULT_LAMBDA,
               levels: int = DEFAULT_LEVELS) -> float:
    """Consistency score without a reference image.

    ``lam`` is carried for reporting symmetry with the reference-guided
    score; the attenuation strength itself is baked into the predictor.
    """
    d = to_luma(degraded)
    if (d.height, d.width) != (restored.height, restored.width):
        d = resize_bicubic(d, restored.height, restored.width)
    try:
        predicted = predictor(d)
    except PredictorError:
        raise
    except Exception as exc:
        raise PredictorError(f"attenuation predictor failed: {exc}") from exc
    score, _ = score_against_attenuated(to_luma(restored), predicted, levels)
    return score


# ---------------------------------------------------------------------------
# Training pair generation
# ---------------------------------------------------------------------------

@dataclass
class PairEntry:
    degraded_path: str
    target_path: str
    spec_text: str
    source_ref_path: str

    def to_json_dict(self) -> dict:
        return {
            "degraded_path": self.degraded_path,
            "target_path": self.target_path,
            "spec_text": self.spec_text,
            "source_ref_path": self.source_ref_path,
        }


@dataclass
class PairManifest:
    entries: list[PairEntry]
    lam: float
    levels: int
    errors: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "v": MANIFEST_VERSION,
            "lambda": self.lam,
            "levels": self.levels,
            "entries": [e.to_json_dict() for e in self.entries],
            "errors": self.errors,
        }

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path: str | os.PathLike) -> "PairManifest":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        entries = [PairEntry(e["degraded_path"], e["target_path"],
                             e["spec_text"], e["source_ref_path"])
                   for e in raw["entries"]]
        return PairManifest(entries, raw["lambda"], raw["levels"],
                            raw.get("errors", []))

    def predictor(self) -> AttenuationPredictor:
        """File-backed predictor over this manifest's (degraded, target) pairs."""
        return predictor_from_files({e.degraded_path: e.target_path
                                     for e in self.entries})


def gen_training_pairs(refs: list[str], specs: list[str], out_dir: str | os.PathLike,
                       lam: float = DEFAULT_LAMBDA, levels: int = DEFAULT_LEVELS,
                       ) -> PairManifest:
    """Write (degraded, attenuated-reference) PGM pairs for every (ref, spec).

    Per-entry failures are recorded in the manifest's ``errors`` list and
    generation continues. The manifest itself lands in ``out_dir/pairs.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = PairManifest([], lam, levels)
    index = 0
    for ref_path in refs:
        for spec_text in specs:
            try:
                spec = parse_degradation(spec_text)
                ref = load_image(ref_path)
                degraded = apply_degradation(ref, spec)
                target = rgcdi_attenuated_image(ref, degraded, lam, levels)
                degraded_path = out / f"pair_{index:04d}_degraded.pgm"
                target_path = out / f"pair_{index:04d}_target.pgm"
                save_image(to_luma(degraded), degraded_path)
                save_image(target, target_path)
                manifest.entries.append(PairEntry(
                    str(degraded_path), str(target_path), spec_text, str(ref_path)))
            except Exception as exc:
                manifest.errors.append(
                    {"ref": str(ref_path), "spec": spec_text, "error": str(exc)})
            index += 1
    manifest.save(out / "pairs.json")
    return manifest
