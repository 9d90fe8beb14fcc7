"""
Panel construction and the deterministic transforms
====================================================

Build a small country-quarter panel from a CSV, patch interior gaps by
linear interpolation, derive lags and a real rate, and compute the
cross-section averages that later approximate latent common factors.
"""

import tempfile
from pathlib import Path

import numpy as np

from panelfactors import (
    CsvSchema,
    TransformSpec,
    apply_transforms,
    balance,
    cross_section_averages,
    load_csv,
)

# a toy file: two countries, eight quarters, one gap in AUT's ratio
rows = ["country,period,ratio,nominal,cpi"]
rng = np.random.default_rng(1)
for country, level in (("AUT", 60.0), ("BEL", 80.0)):
    cpi = 100.0
    for t in range(8):
        year, quarter = 2004 + t // 4, t % 4 + 1
        cpi *= 1 + 0.005 * rng.random()
        ratio = "" if (country, t) == ("AUT", 3) else f"{level + t + rng.normal():.3f}"
        rows.append(f"{country},{year}q{quarter},{ratio},{2.0 + 0.1 * t:.2f},{cpi:.4f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "toy.csv"
    path.write_text("\n".join(rows) + "\n")
    panel = load_csv(path, CsvSchema(variables=("ratio", "nominal", "cpi")))

print("loaded:", panel.n_countries, "countries x", panel.n_periods, "quarters")
print("missing cells in ratio:", int(panel.mask["ratio"].sum()))

# interior gaps sit on the affine path between their neighbours; edges are
# never extrapolated -- the balance window has to exclude them instead
panel = apply_transforms(panel, [
    TransformSpec("interpolate-linear", "ratio", "ratio", replace=True),
    TransformSpec("lag", "ratio", "ratio_l1", k=1),
    TransformSpec("real-rate-combine", ("nominal", "cpi"), "real_rate"),
])
print("after interpolation:", int(panel.mask["ratio"].sum()), "missing cells")
print("AUT ratio:", np.round(panel.values["ratio"][0], 2))

# the first quarter is consumed by the lag and the price difference
balanced = balance(panel, ["ratio", "ratio_l1", "real_rate"],
                   window=("2004q2", "2005q4"))
print("balanced window:", balanced.period_labels()[0], "...",
      balanced.period_labels()[-1])

averages = cross_section_averages(balanced, ["ratio"], lags=1)
print("cross-section average of the ratio:")
for name, series in averages.items():
    print(f"  {name}: {np.round(series, 2)}")
