"""
Image contrast: why ghost images sit on a large background
==========================================================

The correlation signal rides on the product of mean photocurrents.  For a
binary mask the spatial contrast falls roughly as (coherence area)/(open
area), and a detector slower than the coherence time costs a further factor.
"""

# %%
import numpy as np

from ghostimaging import DetectionSetup, GaussianSchellParams, Preset, TransverseGrid
from ghostimaging.imaging import analytic_image, contrast, contrast_closed_form
from ghostimaging.masks import cells_mask

rho0 = 1e-4
params = GaussianSchellParams(P=1.0, a0=1e5 * rho0, rho0=rho0, T0=1e-12)
grid = TransverseGrid(4096, rho0 / 4)

# %% [markdown]
# Temporal factor: numeric filter convolution against the closed forms.

# %%
for td_over_t0 in (0.1, 1.0, 10.0, 100.0):
    setup = DetectionSetup(filter_width=td_over_t0 * params.T0)
    c = contrast_closed_form(Preset.THERMAL_MAX, params, cells_mask(grid, [0.0], rho0), setup)
    print(f"Td/T0 = {td_over_t0:6.1f}: Ct = {c.temporal:.5f}  closed form {1 / np.sqrt(1 + (td_over_t0 / 2) ** 2):.5f}")

# %% [markdown]
# Spatial factor for masks made of N isolated coherence-sized openings.

# %%
setup = DetectionSetup(filter_width=params.T0)
for n in (1, 10, 100):
    centers = (np.arange(n) - (n - 1) / 2) * 6 * rho0
    mask = cells_mask(grid, centers, rho0)
    exact = contrast_closed_form(Preset.THERMAL_MAX, params, mask, setup)
    approx = contrast_closed_form(Preset.THERMAL_MAX, params, mask, setup, binary_approximation=True)
    measured = contrast(analytic_image(Preset.THERMAL_MAX, params, None, mask, setup), params, setup)
    print(f"N = {n:3d}: Cs = {exact.spatial:.4f} (from image {measured.spatial:.4f}), rho0/A_T = {approx.spatial:.4f}")
