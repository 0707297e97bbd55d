"""Reference-agnostic scoring with different attenuation predictors.

The reference-agnostic score replaces the reference-guided attenuation
with a prediction made from the degraded image alone. An oracle
predictor (which secretly uses the reference) reproduces the guided
score exactly; the identity predictor is fine for mild blur and breaks
down on noise; file-backed predictions let an externally trained model
plug in. Training pairs for such a model come out of
``gen_training_pairs``.
"""

import tempfile
from pathlib import Path

from cdiqa.cdi import rgcdi_psnr
from cdiqa.degrade import apply_degradation
from cdiqa.image import save_image
from cdiqa.racdi import (
    gen_training_pairs,
    identity_predictor,
    racdi_psnr,
    rgcdi_oracle_predictor,
)
from cdiqa.synth import scrambled_detail_restoration, synth_image


def main():
    ref = synth_image(3, 128, 128)
    restored = scrambled_detail_restoration(ref, 33, scramble_levels=2)

    print(f"{'degradation':>34s} {'RGCDI':>8s} {'oracle':>8s} {'identity':>9s}")
    for spec in ("blur(sigma=0.4,size=5)", "blur(sigma=5,size=9)",
                 "noise(sigma=50,seed=7)", "jpeg(qf=10)"):
        degraded = apply_degradation(ref, spec)
        guided = rgcdi_psnr(ref, degraded, restored).rgcdi_psnr
        oracle = racdi_psnr(degraded, restored, rgcdi_oracle_predictor(ref))
        ident = racdi_psnr(degraded, restored, identity_predictor)
        print(f"{spec:>34s} {guided:8.3f} {oracle:8.3f} {ident:9.3f}")

    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        ref_path = d / "ref.pgm"
        save_image(ref, ref_path)
        manifest = gen_training_pairs(
            [str(ref_path)],
            ["blur(sigma=2,size=13)", "noise(sigma=25,seed=5)", "jpeg(qf=20)"],
            d / "pairs")
        print(f"\nwrote {len(manifest.entries)} (degraded, target) training pairs;")
        entry = manifest.entries[0]
        print(f"e.g. {Path(entry.degraded_path).name} -> {Path(entry.target_path).name}"
              f" for '{entry.spec_text}'")


if __name__ == "__main__":
    main()
