"""What a TV ball does to a velocity model.

A layered model with a fast inclusion is projected onto shrinking TV
balls (90%, 60% and 30% of its own TV).  Smaller radii flatten the
layers and shrink the inclusion, and the projected model moves steadily
further from the original.  Each result is written as a PGM image plus
a CSV depth profile through the inclusion.

Run:  python demos/02_tv_projection.py [output_dir]
"""
import subprocess
import sys
from pathlib import Path

import numpy as np

from tvfwi.constraints import tv_norm
from tvfwi.grid import Bounds, Grid, ModelField, make_synthetic
from tvfwi.io import write_model
from tvfwi.pdhg import default_steps, project_intersection

out = Path(sys.argv[1] if len(sys.argv) > 1 else "tv_projection_out")
out.mkdir(exist_ok=True)

grid = Grid(60, 120, 20.0)
v = grid.to_array(make_synthetic("layered", grid).velocity)
zz, xx = np.meshgrid(np.arange(grid.nz), np.arange(grid.nx), indexing="ij")
v[((zz - 33) / 7.0) ** 2 + ((xx - 48) / 12.0) ** 2 <= 1] = 4200.0
model = ModelField.from_velocity(grid, grid.to_vector(v))
bounds = Bounds.from_velocity(grid, 1400.0, 5000.0)
tau0 = tv_norm(grid, model.values)
write_model(out / "original.model", model)

print(f"TV of the original model: {tau0:.4e}")
for frac in (0.9, 0.6, 0.3):
    params = default_steps(np.ones(grid.size), 0.0, grid.h, step_ratio=0.3, tol=1e-6, max_iters=100_000)
    proj, res = project_intersection(model, bounds, tau=frac * tau0, params=params)
    dist = np.linalg.norm(proj.values - model.values) / np.linalg.norm(model.values)
    vel = proj.velocity
    print(f"tau = {frac:.1f} tau0: {res.iters:5d} PDHG iterations, relative distance {dist:.3e}, "
          f"velocity range {vel.min():.0f} to {vel.max():.0f} m/s")
    name = out / f"tau{int(frac * 100):02d}.model"
    write_model(name, proj)
    # the CLI renders the image and the slice through the inclusion
    subprocess.run([sys.executable, "-m", "tvfwi.cli", "render", "--model", str(name),
                    "--out", str(name.with_suffix(".pgm")), "--vmin", "1400", "--vmax", "5000", "--slice", "48"],
                   check=True, stdout=subprocess.DEVNULL)
print(f"images and depth profiles written to {out}/")
