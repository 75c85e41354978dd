import numpy as np
import pytest

from histocbir.errors import DegenerateWedgeError, InsufficientTissueError
from histocbir.fixtures import beer_lambert_image, random_he_basis, tissue_like_concentrations
from histocbir.imaging import RasterImage, to_optical_density
from histocbir.stains import (
    StainBasis,
    StainConcentrationImage,
    StainSeparationParams,
    angle_between_deg,
    concentrations_to_channels,
    estimate_stain_basis,
    separate_group,
    separate_stains,
)

H_REF = np.array([0.65, 0.70, 0.29]) / np.linalg.norm([0.65, 0.70, 0.29])
E_REF = np.array([0.07, 0.99, 0.11]) / np.linalg.norm([0.07, 0.99, 0.11])
BASIS = StainBasis(h_vector=H_REF, e_vector=E_REF)


class TestStainBasisInvariants:
    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            StainBasis(h_vector=H_REF * 1.1, e_vector=E_REF)

    def test_rejects_negative_components(self):
        v = np.array([0.8, -0.1, 0.59])
        with pytest.raises(ValueError):
            StainBasis(h_vector=v / np.linalg.norm(v), e_vector=E_REF)

    def test_rejects_collinear(self):
        with pytest.raises(DegenerateWedgeError):
            StainBasis(h_vector=H_REF, e_vector=H_REF)


class TestEstimateStainBasis:
    def test_phantom_recovery_within_5_degrees(self, rng):
        # forward-model phantom with uniform concentrations in [0.1, 1.5]
        h = rng.uniform(0.1, 1.5, (64, 64))
        e = rng.uniform(0.1, 1.5, (64, 64))
        img = beer_lambert_image(h, e, BASIS)
        est = estimate_stain_basis(to_optical_density(img).pixels())
        assert angle_between_deg(est.h_vector, H_REF) < 5.0
        assert angle_between_deg(est.e_vector, E_REF) < 5.0

    def test_all_white_insufficient_tissue(self):
        img = RasterImage(np.full((32, 32, 3), 255.0))
        with pytest.raises(InsufficientTissueError):
            estimate_stain_basis(to_optical_density(img).pixels())

    def test_single_stain_degenerate(self, rng):
        scale = rng.uniform(0.2, 2.0, (40, 40))
        img = beer_lambert_image(scale, np.zeros_like(scale), BASIS)
        with pytest.raises(DegenerateWedgeError):
            estimate_stain_basis(to_optical_density(img).pixels())

    def test_pixel_order_invariant(self, rng):
        h, e = tissue_like_concentrations(32, rng)
        od = to_optical_density(beer_lambert_image(h, e, BASIS)).pixels()
        a = estimate_stain_basis(od)
        b = estimate_stain_basis(od[rng.permutation(od.shape[0])])
        assert angle_between_deg(a.h_vector, b.h_vector) < 1e-6
        assert angle_between_deg(a.e_vector, b.e_vector) < 1e-6

    def test_duplication_invariant(self, rng):
        h, e = tissue_like_concentrations(32, rng)
        od = to_optical_density(beer_lambert_image(h, e, BASIS)).pixels()
        a = estimate_stain_basis(od)
        b = estimate_stain_basis(np.concatenate([od, od]))
        assert angle_between_deg(a.h_vector, b.h_vector) < 0.1
        assert angle_between_deg(a.e_vector, b.e_vector) < 0.1

    def test_params_validated(self):
        with pytest.raises(ValueError):
            StainSeparationParams(od_threshold=3.5)
        with pytest.raises(ValueError):
            StainSeparationParams(angle_percentile=60.0)


class TestSeparateStains:
    def test_pure_h_ray(self):
        od_img = to_optical_density(beer_lambert_image(np.full((4, 4), 0.8), np.zeros((4, 4)), BASIS))
        conc = separate_stains(od_img, BASIS)
        assert np.allclose(conc.h_channel, 0.8, atol=1e-6)
        assert np.allclose(conc.e_channel, 0.0, atol=1e-6)

    def test_white_pixel(self):
        od_img = to_optical_density(RasterImage(np.full((2, 2, 3), 255.0)))
        conc = separate_stains(od_img, BASIS)
        assert np.allclose(conc.h_channel, 0.0)
        assert np.allclose(conc.e_channel, 0.0)

    def test_exact_two_vector_least_squares(self):
        od = 0.5 * H_REF + 0.3 * E_REF
        od_img = to_optical_density(
            RasterImage(((256.0 * np.power(10.0, -od)) - 1.0).reshape(1, 1, 3))
        )
        conc = separate_stains(od_img, BASIS)
        assert conc.h_channel[0, 0] == pytest.approx(0.5, abs=1e-9)
        assert conc.e_channel[0, 0] == pytest.approx(0.3, abs=1e-9)

    def test_positive_homogeneity(self, rng):
        h = rng.uniform(0.2, 1.0, (8, 8))
        e = rng.uniform(0.2, 1.0, (8, 8))
        od = h[..., None] * H_REF + e[..., None] * E_REF
        from histocbir.imaging import OpticalDensityImage

        c1 = separate_stains(OpticalDensityImage(od), BASIS)
        c2 = separate_stains(OpticalDensityImage(3.0 * od), BASIS)
        assert np.allclose(c2.h_channel, 3.0 * c1.h_channel, rtol=1e-12)
        assert np.allclose(c2.e_channel, 3.0 * c1.e_channel, rtol=1e-12)

    def test_reconstruction_error_small(self, rng):
        h, e = tissue_like_concentrations(32, rng)
        img = beer_lambert_image(h, e, BASIS)
        od_img = to_optical_density(img)
        est = estimate_stain_basis(od_img.pixels())
        conc = separate_stains(od_img, est)
        recon = conc.h_channel[..., None] * est.h_vector + conc.e_channel[..., None] * est.e_vector
        od = od_img.od
        norms = np.linalg.norm(od, axis=2)
        tissue = norms > 0.15
        rel = np.linalg.norm((recon - od)[tissue], axis=1) / norms[tissue]
        assert rel.mean() < 0.05


class TestConcentrationsToChannels:
    def test_zero_channel_stays_zero(self, rng):
        h = rng.uniform(0.1, 2.0, (10, 10))
        conc = StainConcentrationImage(h_channel=h, e_channel=np.zeros((10, 10)))
        out = concentrations_to_channels(conc)
        assert np.all(out.channel(1) == 0.0)

    def test_linear_rescale(self):
        conc = StainConcentrationImage(h_channel=np.full((2, 2), 1.0), e_channel=np.zeros((2, 2)))
        out = concentrations_to_channels(conc, percentiles=(2.0, 1.0))
        assert np.allclose(out.channel(0), 127.5)

    def test_value_at_percentile_maps_to_255(self, rng):
        h = rng.uniform(0.0, 1.0, (20, 20))
        p99 = float(np.percentile(h, 99.0))
        conc = StainConcentrationImage(h_channel=h, e_channel=h)
        out = concentrations_to_channels(conc)
        scaled = out.channel(0)
        at = np.isclose(h, p99)
        if at.any():
            assert np.allclose(scaled[at], 255.0)
        assert scaled.max() <= 255.0

    def test_above_percentile_clamps(self):
        h = np.concatenate([np.full(990, 1.0), np.full(10, 5.0)]).reshape(10, 100)
        conc = StainConcentrationImage(h_channel=h, e_channel=h)
        out = concentrations_to_channels(conc)
        assert out.channel(0).max() == 255.0


class TestSeparateGroup:
    def test_single_patch_group_matches_per_patch(self, rng):
        h, e = tissue_like_concentrations(32, rng)
        img = beer_lambert_image(h, e, BASIS)
        group = separate_group([img])
        od_img = to_optical_density(img)
        basis = estimate_stain_basis(od_img.pixels())
        conc = separate_stains(od_img, basis)
        solo = concentrations_to_channels(conc)
        assert np.allclose(group.channels[0].data, solo.data)

    def test_pooled_rescues_single_stain_patches(self, rng):
        # one pure-H patch and one pure-E patch: individually degenerate,
        # together they span the wedge
        a_h = rng.uniform(0.2, 2.0, (32, 32))
        patch_a = beer_lambert_image(a_h, np.zeros((32, 32)), BASIS)
        b_e = rng.uniform(0.2, 2.0, (32, 32))
        patch_b = beer_lambert_image(np.zeros((32, 32)), b_e, BASIS)
        for patch in (patch_a, patch_b):
            with pytest.raises(DegenerateWedgeError):
                estimate_stain_basis(to_optical_density(patch).pixels())
        group = separate_group([patch_a, patch_b])
        assert angle_between_deg(group.basis.h_vector, H_REF) < 5.0
        assert angle_between_deg(group.basis.e_vector, E_REF) < 5.0
        # patch A is hematoxylin-only: its E channel should stay near zero
        assert group.channels[0].channel(1).mean() < group.channels[0].channel(0).mean() * 0.1
        assert group.channels[1].channel(0).mean() < group.channels[1].channel(1).mean() * 0.1

    def test_synthetic_wsi_patches(self, rng):
        # 12 patches of one synthetic slide with a shared basis
        basis = random_he_basis(rng)
        patches = []
        truth = []
        for _ in range(12):
            h, e = tissue_like_concentrations(24, rng)
            truth.append(np.stack([h, e], axis=-1))
            patches.append(beer_lambert_image(h, e, basis))
        group = separate_group(patches)
        errs = []
        for patch, t in zip(patches, truth):
            conc = separate_stains(to_optical_density(patch), group.basis)
            est = np.stack([conc.h_channel, conc.e_channel], axis=-1)
            errs.append(np.linalg.norm(est - t) / np.linalg.norm(t))
        assert max(errs) < 0.05

    def test_different_hue_phantoms_each_separate(self, rng):
        # stains appear as noticeably different colours in the two images,
        # yet each image's own estimated basis explains its pixels
        for _ in range(2):
            basis = random_he_basis(rng)
            h, e = tissue_like_concentrations(32, rng)
            img = beer_lambert_image(h, e, basis)
            od_img = to_optical_density(img)
            est = estimate_stain_basis(od_img.pixels())
            conc = separate_stains(od_img, est)
            recon = (
                conc.h_channel[..., None] * est.h_vector
                + conc.e_channel[..., None] * est.e_vector
            )
            od = od_img.od
            norms = np.linalg.norm(od, axis=2)
            tissue = norms > 0.15
            rel = np.linalg.norm((recon - od)[tissue], axis=1) / norms[tissue]
            assert rel.mean() < 0.05

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            separate_group([])
