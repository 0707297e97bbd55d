import json

import numpy as np
import pytest

from cdiqa.cli import main
from cdiqa.degrade import apply_degradation
from cdiqa.image import load_image, save_image
from cdiqa.synth import scrambled_detail_restoration, synth_image


@pytest.fixture(scope="module")
def triple_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    ref = synth_image(21, 128, 128)
    spec = "blur(sigma=2,size=13)|noise(sigma=20,seed=4)"
    degraded = apply_degradation(ref, spec)
    restored = scrambled_detail_restoration(ref, 22, scramble_levels=2)
    paths = {}
    for name, img in [("ref", ref), ("degraded", degraded), ("restored", restored)]:
        p = d / f"{name}.pgm"
        save_image(img, p)
        paths[name] = str(p)
    return d, paths, spec


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


class TestScore:
    def test_json_contract(self, capsys, triple_files):
        d, paths, spec = triple_files
        code, doc = run_json(capsys, [
            "score", "--ref", paths["ref"], "--degraded", paths["degraded"],
            "--restored", paths["restored"], "--spec", spec, "--json"])
        assert code == 0
        for key in ("rgcdi_psnr", "psnr", "ssim", "deg_psnr"):
            assert isinstance(doc[key], float)
        assert doc["lambda"] == 0.3 and doc["levels"] == 4

    def test_stdout_is_single_json_document(self, capsys, triple_files):
        d, paths, spec = triple_files
        code = main(["score", "--ref", paths["ref"], "--degraded",
                     paths["degraded"], "--restored", paths["restored"], "--json"])
        out = capsys.readouterr().out
        assert code == 0
        json.loads(out)  # whole stdout parses as one document

    def test_text_mode(self, capsys, triple_files):
        d, paths, spec = triple_files
        code = main(["score", "--ref", paths["ref"], "--degraded",
                     paths["degraded"], "--restored", paths["restored"]])
        out = capsys.readouterr().out
        assert code == 0
        assert "RGCDI_PSNR:" in out and "SSIM:" in out

    def test_missing_file_is_domain_error(self, capsys, triple_files):
        d, paths, spec = triple_files
        code = main(["score", "--ref", str(d / "absent.pgm"),
                     "--degraded", paths["degraded"],
                     "--restored", paths["restored"]])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_spec_is_domain_error(self, capsys, triple_files):
        d, paths, _ = triple_files
        code = main(["score", "--ref", paths["ref"], "--degraded",
                     paths["degraded"], "--restored", paths["restored"],
                     "--spec", "blur(sigma=)"])
        assert code == 1
        assert "offset" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, triple_files):
        with pytest.raises(SystemExit) as exc:
            main(["score", "--nope"])
        assert exc.value.code == 2


class TestDegrade:
    def test_deterministic_output_files(self, capsys, triple_files, tmp_path):
        d, paths, _ = triple_files
        spec = "noise(sigma=50,seed=7)"
        out1, out2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
        assert main(["degrade", "--in", paths["ref"], "--out", str(out1),
                     "--spec", spec]) == 0
        assert main(["degrade", "--in", paths["ref"], "--out", str(out2),
                     "--spec", spec]) == 0
        capsys.readouterr()
        assert out1.read_bytes() == out2.read_bytes()

    def test_down_output_dims(self, capsys, triple_files, tmp_path):
        d, paths, _ = triple_files
        out = tmp_path / "down.pgm"
        code, doc = run_json(capsys, ["degrade", "--in", paths["ref"], "--out",
                                      str(out), "--spec", "down(factor=4)", "--json"])
        assert code == 0
        assert doc["width"] == 32 and doc["height"] == 32
        assert load_image(out).width == 32


class TestRacdi:
    def test_identity_predictor(self, capsys, triple_files):
        d, paths, _ = triple_files
        code, doc = run_json(capsys, ["racdi", "--degraded", paths["degraded"],
                                      "--restored", paths["restored"], "--json"])
        assert code == 0
        assert isinstance(doc["racdi_psnr"], float)

    def test_files_predictor(self, capsys, triple_files, tmp_path):
        d, paths, _ = triple_files
        mapping = {paths["degraded"]: paths["ref"]}
        map_path = tmp_path / "map.json"
        map_path.write_text(json.dumps(mapping))
        code, doc = run_json(capsys, [
            "racdi", "--degraded", paths["degraded"], "--restored",
            paths["restored"], "--predictor", f"files:{map_path}", "--json"])
        assert code == 0

    def test_unknown_predictor(self, capsys, triple_files):
        d, paths, _ = triple_files
        code = main(["racdi", "--degraded", paths["degraded"],
                     "--restored", paths["restored"], "--predictor", "magic"])
        assert code == 1


class TestSweepBlur:
    def test_csv_on_stdout(self, capsys, triple_files):
        d, paths, spec = triple_files
        code = main(["sweep-blur", "--ref", paths["ref"], "--degraded",
                     paths["degraded"], "--restored", paths["restored"],
                     "--spec", spec, "--sigmas", "0,0.5,1.0"])
        out = capsys.readouterr().out
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "sigma,metric,raw,normalized"
        assert len(lines) == 1 + 3 * 3

    def test_missing_anchor(self, capsys, triple_files):
        d, paths, spec = triple_files
        code = main(["sweep-blur", "--ref", paths["ref"], "--degraded",
                     paths["degraded"], "--restored", paths["restored"],
                     "--spec", spec, "--sigmas", "0.5,1.0"])
        assert code == 1


class TestExplore:
    def test_nonunique_json(self, capsys, tmp_path):
        ref = synth_image(31, 64, 64)
        from cdiqa.degrade import conv2_reflect, gaussian_kernel
        from cdiqa.image import ImageBuffer

        y = ImageBuffer.from_plane(conv2_reflect(ref.plane(), gaussian_kernel(5.0, 9)))
        init = scrambled_detail_restoration(ref, 5, scramble_levels=2)
        ypath, ipath = tmp_path / "y.pgm", tmp_path / "init.pgm"
        save_image(y, ypath)
        save_image(init, ipath)
        code = main(["explore", "nonunique", "--degraded", str(ypath),
                     "--init", str(ipath), "--sigma", "5", "--size", "9",
                     "--steps", "60", "--out", str(tmp_path / "r.pgm"), "--json"])
        out = capsys.readouterr().out
        assert code == 0
        doc = json.loads(out)
        assert doc["deg_psnr_vs_input"] > 20.0
        assert (tmp_path / "r.pgm").exists()

    def test_indeterminate_json(self, capsys, tmp_path):
        ref = synth_image(32, 64, 64)
        rpath = tmp_path / "x.pgm"
        save_image(ref, rpath)
        code = main(["explore", "indeterminate", "--ref", str(rpath),
                     "--k1-sigma", "1.0", "--k2-sigma", "1.12",
                     "--steps", "60", "--json"])
        out = capsys.readouterr().out
        assert code == 0
        assert json.loads(out)["iterations"] >= 1


class TestGenPairsAndEval:
    def test_gen_pairs(self, capsys, triple_files, tmp_path):
        d, paths, _ = triple_files
        code, doc = run_json(capsys, [
            "gen-pairs", "--refs", paths["ref"], "--specs",
            "blur(sigma=2,size=13)", "noise(sigma=25,seed=5)",
            "--out-dir", str(tmp_path / "pairs"), "--json"])
        assert code == 0
        assert doc["entries"] == 2 and doc["errors"] == 0
        assert (tmp_path / "pairs" / "pairs.json").exists()

    def test_eval_2afc_four_decimals(self, capsys, tmp_path, monkeypatch):
        from cdiqa.bench import make_fixture_trials

        make_fixture_trials(tmp_path, n_images=1)
        monkeypatch.setenv("CDI_THREADS", "2")
        code = main(["eval-2afc", "--manifest", str(tmp_path / "trials.json"),
                     "--metric", "rgcdi"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("rgcdi 2AFC: ")
        value_text = out.split(": ")[1].strip()
        assert len(value_text.split(".")[1]) == 4

    def test_eval_2afc_bad_metric_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["eval-2afc", "--manifest", "x.json", "--metric", "vibes"])
        assert exc.value.code == 2
