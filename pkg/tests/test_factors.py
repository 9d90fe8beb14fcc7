import numpy as np
import pytest
from numpy.testing import assert_allclose

from panelfactors import ahn_horenstein, count_factors, eigen_spectrum, extract_pcs
from panelfactors.errors import DegenerateSpectrumError, RankError, SchemaError


def factor_matrix(rng, n=30, t=65, m=3, snr=1.0, ar=0.5):
    """N x T with m latent AR(1) factors, unit-normal loadings, unit noise."""
    innov = rng.normal(size=(m, t))
    f = np.zeros((m, t))
    f[:, 0] = innov[:, 0] / np.sqrt(1 - ar ** 2)
    for s in range(1, t):
        f[:, s] = ar * f[:, s - 1] + innov[:, s]
    loadings = rng.normal(size=(n, m))
    noise_sd = np.sqrt(m / ((1 - ar ** 2) * snr))
    return loadings @ f + noise_sd * rng.normal(size=(n, t))


class TestSpectrum:
    def test_rank_one_matrix(self):
        rng = np.random.default_rng(70)
        a, b = rng.normal(size=12), rng.normal(size=20)
        lam = eigen_spectrum(np.outer(a, b), center=False)
        assert np.sum(lam > 0) == 1
        expected = (a @ a) * (b @ b) / (12 * 20)
        assert_allclose(lam[0], expected, rtol=1e-12)

    def test_trace_identity(self):
        rng = np.random.default_rng(71)
        U = rng.normal(size=(9, 14))
        lam = eigen_spectrum(U, center=False)
        assert abs(lam.sum() - np.sum(U ** 2) / U.size) < 1e-10

    def test_duplicating_every_unit_leaves_spectrum_fixed(self):
        rng = np.random.default_rng(72)
        U = rng.normal(size=(8, 15))
        lam = eigen_spectrum(U, center=False)
        lam2 = eigen_spectrum(np.vstack([U, U]), center=False)
        assert_allclose(lam, lam2, atol=1e-12)

    def test_duplicated_row_scaling_on_rank_one(self):
        # duplicating one row of a rank-1 matrix keeps the direction and
        # rescales the single eigenvalue by a computable factor
        rng = np.random.default_rng(73)
        a, b = rng.normal(size=6), rng.normal(size=11)
        U = np.outer(a, b)
        stacked = np.vstack([U, U[2]])
        lam = eigen_spectrum(U, center=False)
        lam2 = eigen_spectrum(stacked, center=False)
        factor = ((a @ a + a[2] ** 2) / 7) / ((a @ a) / 6)
        assert_allclose(lam2[0], lam[0] * factor, rtol=1e-10)
        # dense eigendecomposition oracle for the stacked matrix
        dense = np.linalg.eigvalsh(stacked.T @ stacked / stacked.size)[::-1]
        assert_allclose(lam2[0], dense[0], rtol=1e-12)

    def test_invariances(self):
        rng = np.random.default_rng(74)
        U = rng.normal(size=(7, 12))
        lam = eigen_spectrum(U)
        perm = rng.permutation(7)
        assert_allclose(eigen_spectrum(U[perm]), lam, atol=1e-12)
        flips = np.where(rng.random(7) < 0.5, -1.0, 1.0)
        assert_allclose(eigen_spectrum(flips[:, None] * U), lam, atol=1e-12)

    def test_zero_matrix_rejected(self):
        with pytest.raises(DegenerateSpectrumError):
            eigen_spectrum(np.zeros((4, 5)), center=False)


class TestAhnHorenstein:
    def test_er_hand_case(self):
        result = ahn_horenstein(np.array([8.0, 4.0, 1.0, 0.5]), kmax=2)
        assert_allclose(result.er, [2.0, 4.0])
        assert result.k_er == 2

    def test_gr_hand_case(self):
        result = ahn_horenstein(np.array([8.0, 1.0, 1.0, 1.0]), kmax=2)
        expected_gr1 = np.log(11.0 / 3.0) / np.log(3.0 / 2.0)
        expected_gr2 = np.log(3.0 / 2.0) / np.log(2.0)
        assert_allclose(result.gr, [expected_gr1, expected_gr2], rtol=1e-12)
        assert result.k_gr == 1

    def test_scale_invariance(self):
        rng = np.random.default_rng(75)
        lam = np.sort(rng.random(12))[::-1]
        a = ahn_horenstein(lam, kmax=5)
        b = ahn_horenstein(lam * 37.5, kmax=5)
        assert (a.k_er, a.k_gr) == (b.k_er, b.k_gr)
        assert_allclose(a.er, b.er)
        assert_allclose(a.gr, b.gr)

    def test_zero_tail_truncates_with_warning(self):
        lam = np.array([4.0, 2.0, 1.0, 0.0, 0.0, 0.0])
        with pytest.warns(RuntimeWarning, match="truncated"):
            result = ahn_horenstein(lam, kmax=4)
        assert result.truncated
        assert result.kmax < 4

    def test_requires_enough_eigenvalues(self):
        with pytest.raises(SchemaError):
            ahn_horenstein(np.array([3.0, 1.0]), kmax=2)

    def test_three_strong_factors_recovered(self):
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            U = factor_matrix(rng, m=3, snr=1.0)
            if count_factors(U).k_gr == 3:
                hits += 1
        assert hits >= 16  # full 300-rep check lives in the acceptance suite


class TestExtractPcs:
    def test_rank_one_recovery(self):
        rng = np.random.default_rng(76)
        a, b = rng.normal(size=10), rng.normal(size=18)
        fs = extract_pcs(np.outer(a, b), m=1, center=False)
        comp = fs.components[:, 0]
        corr = np.corrcoef(comp, b)[0, 1]
        assert abs(abs(corr) - 1.0) < 1e-10
        # documented sign rule: nonnegative correlation with the column means
        anchor = np.outer(a, b).mean(axis=0)
        assert comp @ anchor >= 0

    def test_orthonormality_and_shares(self):
        rng = np.random.default_rng(77)
        U = factor_matrix(rng, m=3)
        fs = extract_pcs(U, m=3)
        t = U.shape[1]
        gram = fs.components.T @ fs.components / t
        assert np.max(np.abs(gram - np.eye(3))) < 1e-8
        assert np.all(np.diff(fs.shares) <= 1e-12)
        assert_allclose(fs.all_shares().sum(), 1.0, atol=1e-10)

    def test_matches_dense_eigendecomposition(self):
        rng = np.random.default_rng(78)
        U = rng.normal(size=(30, 65))
        Uc = U - U.mean(axis=1, keepdims=True)
        fs = extract_pcs(U, m=4)
        dense_vals, dense_vecs = np.linalg.eigh(Uc.T @ Uc / Uc.size)
        order = np.argsort(dense_vals)[::-1]
        for k in range(4):
            ref = np.sqrt(U.shape[1]) * dense_vecs[:, order[k]]
            got = fs.components[:, k]
            if ref @ got < 0:
                ref = -ref
            assert np.max(np.abs(ref - got)) < 1e-8

    def test_projection_residual_monotone_in_m(self):
        rng = np.random.default_rng(79)
        U = factor_matrix(rng, m=3)
        Uc = U - U.mean(axis=1, keepdims=True)
        t = U.shape[1]
        previous = np.inf
        for m in range(1, 6):
            fs = extract_pcs(U, m=m)
            loadings = Uc @ fs.components / t
            ssr = np.sum((Uc - loadings @ fs.components.T) ** 2)
            assert ssr <= previous + 1e-9
            previous = ssr

    def test_sign_convention_is_deterministic(self):
        rng = np.random.default_rng(80)
        U = rng.normal(size=(12, 25))
        a = extract_pcs(U, m=3)
        b = extract_pcs(U.copy(), m=3)
        assert_allclose(a.components, b.components, atol=0)
        assert a.sign_anchor == b.sign_anchor

    def test_rank_error(self):
        rng = np.random.default_rng(81)
        a, b = rng.normal(size=8), rng.normal(size=13)
        with pytest.raises(RankError):
            extract_pcs(np.outer(a, b), m=3, center=False)
