"""
Photocurrent Monte Carlo versus the moment-factored image
=========================================================

Fields are drawn from their classical Gaussian distribution, converted into
shot-noise-limited photocurrents and correlated.  The estimate converges to
the analytic image; the standard error shrinks as one over the square root
of the number of samples.
"""

# %%
import numpy as np

from ghostimaging import DetectionSetup, GaussianSchellParams, Preset, TransverseGrid, make_source, numeric_image, run_montecarlo
from ghostimaging.masks import double_slit_mask

params = GaussianSchellParams(P=1e4, a0=1.0, rho0=0.5, T0=1.0)
grid = TransverseGrid(32, params.rho0 / 4)
setup = DetectionSetup(filter_width=1.0, pinhole_area=grid.spacing)
mask = double_slit_mask(grid, 0.5, 1.5)

# %%
for preset in (Preset.THERMAL_MAX, Preset.CLASSICAL_PS_MAX):
    state = make_source(preset, params, grid)
    reference = numeric_image(state, None, mask, setup)
    for n in (250, 1000, 4000):
        est = run_montecarlo(state, mask, setup, n_samples=n, seed=3)
        z = np.abs(est.total - reference.total) / est.stderr
        print(f"{preset.value:16s} n = {n:5d}: median stderr / signal = "
              f"{np.median(est.stderr / reference.image_term.max()):.3f}, within 3 sigma: {np.mean(z <= 3):.2f}")

# %% [markdown]
# The image-bearing part alone: estimate minus background.

# %%
state = make_source(Preset.THERMAL_MAX, params, grid)
est = run_montecarlo(state, mask, setup, n_samples=4000, seed=5)
ref = numeric_image(state, None, mask, setup)
for x, a, b in zip(grid.x[::4], est.image_term[::4], ref.image_term[::4]):
    print(f"x = {x:+.2f}: estimate {a:9.4g}   analytic {b:9.4g}")
