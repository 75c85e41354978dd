"""Estimate an H&E basis from image data alone and unmix the stains.

Builds a stained-tissue phantom with a known ground-truth basis, runs the
wedge-finding estimator on the phantom's optical densities, and compares
the recovered stain directions and concentrations against the truth.
Outputs land in demos/out/01/: the phantom RGB image plus its separated
hematoxylin and eosin channel PNGs.
"""
from pathlib import Path

import numpy as np

from histocbir import (
    beer_lambert_image,
    estimate_stain_basis,
    random_he_basis,
    separate_stains,
    to_optical_density,
)
from histocbir.fixtures import save_image_png, tissue_like_concentrations
from histocbir.imaging import save_greyscale_png
from histocbir.stains import angle_between_deg, concentrations_to_channels

out = Path(__file__).parent / "out" / "01"
out.mkdir(parents=True, exist_ok=True)
rng = np.random.default_rng(0)

# A phantom: mixed-stain tissue with nuclei-like (pure H) and stroma-like
# (pure E) regions, rendered through the Beer-Lambert forward model.
truth = random_he_basis(rng)
h_conc, e_conc = tissue_like_concentrations(128, rng)
phantom = beer_lambert_image(h_conc, e_conc, truth)
save_image_png(phantom, out / "phantom.png")

# Recover the basis from the pixels alone: no calibration, no knowledge of
# the true stain colours.
od = to_optical_density(phantom)
basis = estimate_stain_basis(od.pixels())
print("true H direction      ", np.round(truth.h_vector, 4))
print("estimated H direction ", np.round(basis.h_vector, 4))
print(f"H angular error: {angle_between_deg(basis.h_vector, truth.h_vector):.3f} deg")
print(f"E angular error: {angle_between_deg(basis.e_vector, truth.e_vector):.3f} deg")

# Deconvolve and compare concentrations to the ground truth.
conc = separate_stains(od, basis)
rel = np.linalg.norm(conc.h_channel - h_conc) / np.linalg.norm(h_conc)
print(f"hematoxylin concentration relative error: {rel:.3%}")

channels = concentrations_to_channels(conc)
save_greyscale_png(channels.channel(0), out / "phantom.h.png")
save_greyscale_png(channels.channel(1), out / "phantom.e.png")
print(f"wrote {out}/phantom.png, phantom.h.png, phantom.e.png")
