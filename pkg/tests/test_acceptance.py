"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured quantities when its assertions hold.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import json
import pathlib
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import stats

import panelfactors as pf
from panelfactors import ModelSpec, cd_test, count_factors, delta_test, extract_pcs, fit
from panelfactors.cli import main
from panelfactors.simulate import paper_contrast, replication_seed

DATA = pathlib.Path(__file__).parent / "data"
FIXTURE_CONFIG = str(DATA / "fixture_config.json")


def announce(number, message):
    print(f"\nPASS criterion {number}: {message}")


def quiet_mc(config, reps, suite, threads=0, master_seed=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return pf.run_monte_carlo(config, reps=reps, suite=suite,
                                  threads=threads, master_seed=master_seed)


def test_criterion_1_cce_mg_equals_plain_ols_on_augmented_design():
    lags = 2
    worst = 0.0
    for seed in range(20):
        config = pf.DgpConfig(
            n_units=30, n_periods=65, m_ucf=2, m_ocf=1,
            rho_mean=0.4, rho_sd=0.1, beta_mean=(1.0,), beta_sd=0.3,
            gamma=pf.LoadingSpec(0.5, 0.7), gamma_x=pf.LoadingSpec(0.3, 0.4),
            theta=pf.LoadingSpec(0.3, 0.2), theta_x=pf.LoadingSpec(0.2, 0.2),
            seed=9000 + seed)
        panel, _ = pf.gen_dgp(config)
        spec = ModelSpec(dependent="y", lag_dep=1, regressors=("x1",),
                         observed_cf=("g1",), cf_lags=lags,
                         csa=pf.CsaSpec(variables=("y", "x1"), lags=lags))
        result = fit(spec, panel)

        # independent design construction from the raw arrays
        y, x, g = panel.values["y"], panel.values["x1"], panel.common["g1"]
        t = y.shape[1]
        avg_y, avg_x = y.mean(axis=0), x.mean(axis=0)
        window = slice(lags, t)
        for i, country in enumerate(panel.countries):
            cols = [y[i, lags - 1:t - 1], x[i, window]]
            for l in range(lags + 1):
                cols.append(g[lags - l:t - l])
            for series in (avg_y, avg_x):
                for l in range(lags + 1):
                    cols.append(series[lags - l:t - l])
            cols.append(np.ones(t - lags))
            manual = np.linalg.lstsq(np.column_stack(cols), y[i, window],
                                     rcond=None)[0]
            deviation = np.max(np.abs(manual - result.per_unit[country].coefficients))
            worst = max(worst, deviation)
    assert worst < 1e-10
    announce(1, f"CCE-MG per-unit estimates match plain OLS on the augmented "
                f"design; max abs deviation {worst:.2e} over 20 panels")


def test_criterion_2_cd_matches_brute_force_and_closed_form():
    rng = np.random.default_rng(9100)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(4, 20))
        t = int(rng.integers(10, 80))
        U = rng.normal(size=(n, t))
        got = cd_test(U).statistic
        total = sum(np.corrcoef(U[i], U[j])[0, 1]
                    for i in range(n) for j in range(i + 1, n))
        expected = np.sqrt(2.0 * t / (n * (n - 1))) * total
        worst = max(worst, abs(got - expected))
    assert worst < 1e-10

    base = np.array([2.0, -1.0, 0.5, 3.0])
    perfect = np.vstack([base, 3 * base + 2, 0.25 * base - 1])
    statistic = cd_test(perfect).statistic
    assert abs(statistic - 2.0 * np.sqrt(3.0)) < 1e-12
    announce(2, f"cd_test matches the pairwise brute force within {worst:.2e} "
                f"on 50 matrices and returns 2*sqrt(3) on the perfect-correlation case")


def test_criterion_3_growth_rate_factor_count_recovery():
    reps, n, t, ar = 300, 30, 65, 0.5
    rates = {}
    for m in (1, 2, 3):
        hits = 0
        for r in range(reps):
            rng = np.random.default_rng(replication_seed(9200 + m, r))
            innov = rng.normal(size=(m, t))
            f = np.zeros((m, t))
            f[:, 0] = innov[:, 0] / np.sqrt(1 - ar ** 2)
            for s in range(1, t):
                f[:, s] = ar * f[:, s - 1] + innov[:, s]
            loadings = rng.normal(size=(n, m))
            noise_sd = np.sqrt(m / (1 - ar ** 2))  # signal-to-noise = 1
            U = loadings @ f + noise_sd * rng.normal(size=(n, t))
            hits += count_factors(U).k_gr == m
        rates[m] = hits / reps
        assert rates[m] >= 0.80, f"m={m}: hit rate {rates[m]:.3f} < 0.80"
    announce(3, "k_GR hit rates at signal-to-noise 1: " +
                ", ".join(f"m={m}: {rates[m]:.3f}" for m in rates))


def test_criterion_4_dependence_contrast():
    config, suite = paper_contrast(seed=9300)
    report = quiet_mc(config, reps=300, suite=suite)
    twfe = report.cd["TWFE"]["rejection"]["rate"]
    step3 = report.cd["step3"]["rejection"]["rate"]
    assert twfe >= 0.95, f"TWFE CD rejection {twfe:.3f} < 0.95"
    assert step3 <= 0.15, f"step-3 CD rejection {step3:.3f} > 0.15"
    announce(4, f"CD rejects on TWFE residuals in {twfe:.1%} of 300 replications "
                f"and on step-3 residuals in {step3:.1%}")


def test_criterion_5_bias_contrast():
    config = pf.DgpConfig(
        n_units=30, n_periods=65, m_ucf=3, m_ocf=1,
        rho_mean=0.4, rho_sd=0.1, beta_mean=(1.0,), beta_sd=0.2,
        gamma=pf.LoadingSpec(1.0, 0.5), theta=pf.LoadingSpec(0.0, 0.0),
        gamma_x=pf.LoadingSpec(0.7, 0.3), theta_x=pf.LoadingSpec(0.3, 0.2),
        noise_eps=1.0, noise_chi=1.0, noise_omega=1.0,
        factor_ar=0.5, factor_scale=1.3, seed=9400)
    suite = pf.McSuite(estimators=("CCE-MG", "TWFE"))
    report = quiet_mc(config, reps=300, suite=suite)
    cce = abs(report.estimators["CCE-MG"]["x1"]["bias"])
    twfe = abs(report.estimators["TWFE"]["x1"]["bias"])
    assert cce < 0.03, f"CCE-MG |bias| {cce:.4f} >= 0.03"
    assert twfe >= 3.0 * cce, f"TWFE/CCE bias ratio {twfe / max(cce, 1e-12):.2f} < 3"
    announce(5, f"slope |bias|: TWFE {twfe:.4f} vs CCE-MG {cce:.4f} "
                f"(ratio {twfe / max(cce, 1e-12):.1f})")


def _loading_sum_scenario(gamma_shift, seed):
    return pf.DgpConfig(
        n_units=30, n_periods=65, m_ucf=3, m_ocf=1,
        rho_mean=0.4, rho_sd=0.1, beta_mean=(1.0,), beta_sd=0.2,
        gamma=pf.LoadingSpec(0.28, 0.3), theta=pf.LoadingSpec(0.0, 0.0),
        gamma_x=pf.LoadingSpec(0.3, 0.3), theta_x=pf.LoadingSpec(0.3, 0.2),
        noise_eps=1.0, noise_chi=1.0, noise_omega=1.0, factor_ar=0.5,
        regime=pf.RegimeConfig(fixed_share=0.5, gamma_shift=gamma_shift),
        seed=seed)


def test_criterion_6_loading_sum_power_and_size():
    suite = pf.McSuite(estimators=(), run_pipeline=True, pcs=3,
                       regime_split=True, record_loading_sum=True)
    # fixed-group per-factor loading mean 0.28 + 0.52 = 0.80: sums 2.4 vs 0.84
    power_rep = quiet_mc(_loading_sum_scenario(0.52, 9500), reps=300, suite=suite)
    power = power_rep.tests["loading_sum"]["rejection"]["rate"]
    size_rep = quiet_mc(_loading_sum_scenario(0.0, 9501), reps=300, suite=suite)
    size = size_rep.tests["loading_sum"]["rejection"]["rate"]
    assert power >= 0.80, f"power {power:.3f} < 0.80"
    assert 0.01 <= size <= 0.10, f"size {size:.3f} outside [0.01, 0.10]"
    announce(6, f"loading-sum test: power {power:.1%} at group sums 2.4 vs 0.84, "
                f"size {size:.1%} under equal loadings")


def test_criterion_7_delta_test_size_and_power():
    def rejection_rate(beta_sd, reps, seed):
        rejections = 0
        for r in range(reps):
            config = pf.DgpConfig(
                n_units=20, n_periods=60, m_ucf=0, m_ocf=0,
                rho_mean=0.0, beta_mean=(1.0,), beta_sd=beta_sd,
                gamma=pf.LoadingSpec(0, 0), gamma_x=pf.LoadingSpec(0, 0),
                theta=pf.LoadingSpec(0, 0), theta_x=pf.LoadingSpec(0, 0),
                seed=seed)
            panel, _ = pf.gen_dgp(config, seed=replication_seed(seed, r))
            result = fit(ModelSpec(dependent="y", lag_dep=0, regressors=("x1",)),
                         panel)
            rejections += delta_test(result).p_delta < 0.05
        return rejections / reps

    size = rejection_rate(0.0, 500, 9600)
    power = rejection_rate(1.0, 500, 9601)
    assert 0.01 <= size <= 0.10, f"size {size:.3f} outside [0.01, 0.10]"
    assert power >= 0.95, f"power {power:.3f} < 0.95"
    announce(7, f"slope-homogeneity test: size {size:.1%} on homogeneous slopes, "
                f"power {power:.1%} at slope sd 1")


def test_criterion_8_component_invariants():
    worst_gram = 0.0
    for seed in range(20):
        rng = np.random.default_rng(9700 + seed)
        n, t, m = 30, 65, 4
        U = rng.normal(size=(n, t)) + rng.normal(size=(n, 2)) @ rng.normal(size=(2, t))
        first = extract_pcs(U, m=m)
        second = extract_pcs(U.copy(), m=m)
        with ThreadPoolExecutor(max_workers=4) as pool:
            threaded = list(pool.map(lambda _: extract_pcs(U, m=m), range(4)))
        gram = first.components.T @ first.components / t
        worst_gram = max(worst_gram, np.max(np.abs(gram - np.eye(m))))
        assert np.all(np.diff(first.shares) <= 1e-12)
        assert np.array_equal(first.components, second.components)
        for other in threaded:
            assert np.array_equal(first.components, other.components)
        assert first.sign_anchor == second.sign_anchor
    assert worst_gram < 1e-8
    announce(8, f"components orthonormal (max |PC'PC/T - I| = {worst_gram:.2e}), "
                f"shares nonincreasing, sign convention bit-stable across runs "
                f"and thread counts on 20 inputs")


def _strip_volatile(path):
    document = json.loads(path.read_text())
    document.pop("timing", None)
    if "provenance" in document:
        document["provenance"].pop("created_at", None)
    document.get("resolved_config", {}).pop("threads", None)
    return document


def test_criterion_9_end_to_end_determinism(tmp_path, capsys):
    pipe_out = tmp_path / "pipe"
    pipeline_docs = []
    for _ in range(2):
        assert main(["pipeline", "--config", FIXTURE_CONFIG,
                     "--output", str(pipe_out)]) == 0
        pipeline_docs.append(_strip_volatile(pipe_out / "pipeline.json"))
    assert pipeline_docs[0] == pipeline_docs[1]

    sim_out = tmp_path / "sim"
    simulate_docs = []
    for threads in ("1", "8", "1"):
        assert main(["simulate", "--preset", "paper-contrast", "--reps", "6",
                     "--seed", "11", "--threads", threads,
                     "--output", str(sim_out)]) == 0
        simulate_docs.append(_strip_volatile(sim_out / "mc.json"))
    assert simulate_docs[0] == simulate_docs[1] == simulate_docs[2]
    capsys.readouterr()
    announce(9, "pipeline and simulate JSON documents are byte-identical across "
                "reruns and across --threads 1 vs 8 (timestamps excluded)")


def test_criterion_10_benchmark_table_matches_golden_file(tmp_path, capsys):
    out = tmp_path / "bench"
    assert main(["pipeline", "--config", FIXTURE_CONFIG, "--benchmarks",
                 "--output", str(out)]) == 0
    capsys.readouterr()
    regenerated = (out / "table.txt").read_bytes()
    golden = (DATA / "golden_table.txt").read_bytes()
    assert regenerated == golden
    text = regenerated.decode()
    for row in ("CD", "  p", "F: PC = 0", "Delta (all)", "Delta (PC)",
                "t: PC F1 > PC F0", "Share PC (all)", "R2", "R2 (MG)",
                "R2 (within)", "Factors in u_hat", "Obs", "Countries",
                "Time Periods"):
        assert any(line.startswith(row) for line in text.splitlines()), row
    announce(10, "ten-column benchmark table is byte-identical to the golden "
                 "file and carries the full footer block")
