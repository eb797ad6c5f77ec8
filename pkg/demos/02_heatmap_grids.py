"""Emit heatmap grids of robustness and boundary distance.

Writes two CSV files (one per analytic case) with columns
``x1,x2,p_r,d_cf`` over a 60x60 grid, ready for any external plotting
tool.  The printed preview shows the qualitative difference between the
two fields: boundary distance falls off linearly, robustness saturates.
"""

from pathlib import Path

import numpy as np

import rwrobust as rw
from rwrobust import dataio

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)
unit = rw.GaussianUncertainty2D(1.0, 1.0)

cases = {
    "linear": rw.LinearCase(0.0, 1.0, 0.0),
    "corner": rw.CornerCase(0.0, 0.0),
}
for name, case in cases.items():
    x1, x2, p_r, d_cf = rw.grid_eval(case, unit, (-3, 3), (-3, 3), 60)
    path = out_dir / f"grid_{name}.csv"
    dataio.atomic_write(path, dataio.render_grid(x1, x2, p_r, d_cf))
    print(f"wrote {path} ({len(x1)} rows)")

print()
print("profile along the diagonal x1 = x2 for the corner case:")
print(f"{'t':>5} {'p_r':>8} {'d_cf':>7}")
corner = rw.CornerCase(0.0, 0.0)
for t in np.linspace(0.2, 3.0, 8):
    print(
        f"{t:5.2f} {rw.exact_pr(corner, (t, t), unit):8.4f} "
        f"{rw.exact_dcf(corner, (t, t)):7.2f}"
    )
print()
print("d_cf keeps growing linearly while p_r flattens toward 1: far from the")
print("boundary, extra distance no longer buys extra robustness")
