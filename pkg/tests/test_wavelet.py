import numpy as np
import pytest

from cdiqa.image import ImageBuffer
from cdiqa.wavelet import WaveletError, crop_to_multiple, dwt2, idwt2

from conftest import random_image


class TestAnalysis:
    def test_constant_2x2(self):
        img = ImageBuffer(np.ones((1, 2, 2)))
        pyr = dwt2(img, 1)
        np.testing.assert_allclose(pyr.approx, [[2.0]], atol=1e-15)
        for _, band in pyr.bands()[:-1]:
            np.testing.assert_allclose(band, [[0.0]], atol=1e-15)

    def test_impulse_2x2(self):
        img = ImageBuffer(np.array([[[1.0, 0.0], [0.0, 0.0]]]))
        pyr = dwt2(img, 1)
        for _, band in pyr.bands():
            np.testing.assert_allclose(band, [[0.5]], atol=1e-15)

    def test_energy_preserved(self, rng):
        img = random_image(rng, 64, 64)
        pyr = dwt2(img, 4)
        pix = float((img.data ** 2).sum())
        assert pyr.energy() == pytest.approx(pix, rel=1e-10)

    def test_coefficient_count(self, rng):
        img = random_image(rng, 48, 80)
        pyr = dwt2(img, 4)
        assert pyr.coeff_vector().size == 48 * 80

    def test_crop_recorded(self, rng):
        img = random_image(rng, 37, 53)
        pyr = dwt2(img, 2)
        assert pyr.original_dims == (53, 37)
        assert pyr.crop_offset == ((53 - 52) // 2, (37 - 36) // 2)
        assert pyr.approx.shape == (9, 13)

    def test_too_small(self, rng):
        with pytest.raises(WaveletError, match="too small"):
            dwt2(random_image(rng, 3, 3), 2)

    def test_rejects_multichannel(self, rng):
        with pytest.raises(WaveletError, match="1-channel"):
            dwt2(random_image(rng, 8, 8, channels=3), 1)


class TestSynthesis:
    @pytest.mark.parametrize("shape,levels", [((32, 32), 1), ((64, 48), 3), ((128, 128), 4)])
    def test_roundtrip(self, rng, shape, levels):
        img = random_image(rng, *shape)
        rec = idwt2(dwt2(img, levels))
        assert np.abs(rec.data - img.data).max() < 1e-9

    def test_constant_from_zero_details(self):
        img = ImageBuffer(np.full((1, 8, 8), 0.625))
        pyr = dwt2(img, 2)
        rec = idwt2(pyr)
        np.testing.assert_allclose(rec.plane(), 0.625, atol=1e-12)

    def test_linearity_of_scaling(self, rng):
        img = random_image(rng, 16, 16)
        pyr = dwt2(img, 2)
        scaled = pyr.map_bands(lambda _n, b: 3.25 * b)
        rec = idwt2(scaled)
        np.testing.assert_allclose(rec.plane(), 3.25 * img.plane(), atol=1e-12)

    def test_inconsistent_bands_rejected(self, rng):
        pyr = dwt2(random_image(rng, 16, 16), 2)
        lh, hl, hh = pyr.details[0]
        pyr.details[0] = (lh[:2, :2], hl, hh)
        with pytest.raises(WaveletError, match="inconsistent band dimensions"):
            idwt2(pyr)


class TestProperties:
    def test_transform_linearity(self, rng):
        a = random_image(rng, 32, 32)
        b = random_image(rng, 32, 32)
        alpha, beta = 1.7, -0.4
        combo = ImageBuffer(alpha * a.data + beta * b.data)
        pa = dwt2(a, 3).coeff_vector()
        pb = dwt2(b, 3).coeff_vector()
        pc = dwt2(combo, 3).coeff_vector()
        np.testing.assert_allclose(pc, alpha * pa + beta * pb, atol=1e-10)

    def test_distance_invariance(self, rng):
        # coefficient-domain L2 distance equals pixel-domain L2 distance
        for _ in range(10):
            p = dwt2(random_image(rng, 32, 32), 3)
            q = dwt2(random_image(rng, 32, 32), 3)
            coeff_dist = float(np.linalg.norm(p.coeff_vector() - q.coeff_vector()))
            pix_dist = float(np.linalg.norm(idwt2(p).data - idwt2(q).data))
            assert pix_dist == pytest.approx(coeff_dist, rel=1e-10)

    def test_parseval_random_sizes(self, rng):
        for _ in range(25):
            h = int(rng.integers(16, 200))
            w = int(rng.integers(16, 200))
            img = random_image(rng, h, w)
            pyr = dwt2(img, 4)
            left, top, cw, ch = crop_to_multiple(w, h, 4)
            pix = float((img.plane()[top:top + ch, left:left + cw] ** 2).sum())
            assert pyr.energy() == pytest.approx(pix, rel=1e-10)
