"""
Moving the bucket detector: a lens relay in the signal arm
==========================================================

With the bucket a distance L_R behind the mask and a thin lens imaging the
source onto the pinhole plane, the ghost image is a magnified copy,
C'(x) = M^2 C(M x), provided the bucket collects essentially all the light.
A small bucket clips high spatial frequencies and blurs the image.
"""

# %%
import numpy as np

from ghostimaging import DetectionSetup, GaussianSchellParams, Preset, TransverseGrid, ghost_image, make_source
from ghostimaging.imaging import source_constants
from ghostimaging.masks import double_slit_mask
from ghostimaging.relay import RelayConfig, bucket_grid, relay_image

params = GaussianSchellParams(P=1.0, a0=1e-3, rho0=5e-5, T0=1e-12)
grid = TransverseGrid(512, params.rho0 / 8)
k0 = 2 * np.pi / 1e-6
setup = DetectionSetup(filter_width=params.T0)
mask = double_slit_mask(grid, 1e-4, 3e-4)
state = make_source(Preset.THERMAL_MAX, params, grid)
constants = source_constants(state, setup)
direct = ghost_image(state.auto_kernel, mask, setup, constants, state.pi_cross)

# %%
for m in (-1.0, -2.0):
    config = RelayConfig.from_magnification(L_R=0.5, f=0.05, magnification=m)
    scan = relay_image(state.auto_kernel, mask, config, k0, setup, constants, state.pi_cross)
    expected = m**2 * np.interp(m * scan.positions, grid.x, direct.total)
    print(f"M = {m:+.0f}: d1 = {config.d1 * 100:.1f} cm, d2 = {config.d2 * 100:.1f} cm, "
          f"bucket half width {scan.meta['bucket_half_width'] * 1e3:.1f} mm, "
          f"max deviation from M^2 C(M x) = {np.max(np.abs(scan.total - expected)) / expected.max():.1e}")

# %% [markdown]
# Shrinking the bucket: the image departs from the whole-bucket result as
# high spatial frequencies are clipped.

# %%
config = RelayConfig(0.5, 0.1, 0.1, 0.05)
half = bucket_grid(grid, config, k0).half_width
full = relay_image(state.auto_kernel, mask, config, k0, setup, constants, state.pi_cross).image_term
for frac in (0.3, 0.1, 0.03, 0.01):
    img = relay_image(state.auto_kernel, mask, config, k0, setup, constants, state.pi_cross, bucket_half_width=frac * half).image_term
    img = img * full.max() / img.max()
    print(f"bucket = {frac:5.2f} of window: rms deviation from whole-bucket image = "
          f"{np.sqrt(np.mean((img - full) ** 2)) / full.max():.3f}")
