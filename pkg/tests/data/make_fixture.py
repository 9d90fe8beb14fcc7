"""Regenerate the committed CLI fixtures.

Run from the repository root:

    python3 tests/data/make_fixture.py

Writes fixture_panel.csv (a simulated 12-country panel with a switching
exchange rate regime), fixture_config.json (the run configuration used by
the CLI tests), and golden_table.txt (the rendered ten-column benchmark
table the format-fidelity test compares against byte for byte).
"""

import json
import pathlib
import warnings

import pandas as pd

import panelfactors as pf
from panelfactors import report
from panelfactors.cli import build_model, build_pipeline_options
from panelfactors.paneldata import format_period

HERE = pathlib.Path(__file__).parent

CONFIG = {
    "input": {
        "path": "fixture_panel.csv",
        "schema": {
            "country": "country",
            "period": "period",
            "variables": ["y", "x1", "FIXED"],
            "common": ["g1"],
        },
    },
    "window": ["2004q1", "2016q1"],
    "model": {
        "dependent": "y",
        "lag_dep": 1,
        "regressors": ["x1"],
        "observed_cf": ["g1"],
        "cf_lags": 2,
        "csa": {"variables": ["y", "x1"], "lags": 2},
        "regime_var": "FIXED",
        "estimator": "MG",
    },
    "pipeline": {"pcs": 2},
    "output": {"dir": "out"},
}


def main():
    config = pf.DgpConfig(
        n_units=12, n_periods=49, m_ucf=2, m_ocf=1,
        rho_mean=0.4, rho_sd=0.1, beta_mean=(1.0,), beta_sd=0.2,
        gamma=pf.LoadingSpec(0.3, 0.8), theta=pf.LoadingSpec(0.0, 0.0),
        gamma_x=pf.LoadingSpec(0.0, 0.5), theta_x=pf.LoadingSpec(0.3, 0.2),
        regime=pf.RegimeConfig(fixed_share=0.5, gamma_shift=0.4, switch_prob=0.05),
        seed=2024)
    panel, _ = pf.gen_dgp(config)

    rows = []
    for i, country in enumerate(panel.countries):
        for j, period in enumerate(panel.periods):
            rows.append({
                "country": country,
                "period": format_period(period),
                "y": panel.values["y"][i, j],
                "x1": panel.values["x1"][i, j],
                "FIXED": int(panel.values["FIXED"][i, j]),
                "g1": panel.common["g1"][j],
            })
    pd.DataFrame(rows).to_csv(HERE / "fixture_panel.csv", index=False)
    (HERE / "fixture_config.json").write_text(json.dumps(CONFIG, indent=2) + "\n")

    loaded = pf.load_csv(HERE / "fixture_panel.csv",
                         pf.CsvSchema(variables=("y", "x1", "FIXED"), common=("g1",)))
    loaded = pf.balance(loaded, ["y", "x1", "FIXED", "g1"],
                        tuple(CONFIG["window"]))
    spec = build_model(CONFIG["model"])
    options = build_pipeline_options(CONFIG["pipeline"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bench = pf.run_benchmarks(loaded, spec, options)
    (HERE / "golden_table.txt").write_text(report.render_benchmarks(bench))
    print("fixtures written to", HERE)


if __name__ == "__main__":
    main()
