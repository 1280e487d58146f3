import numpy as np
import pytest

from specsr.dictionary import KsvdConfig, ksvd
from specsr.sparse_coding import OmpConfig
from specsr.transfer import (
    MatchedSet,
    TransferConfig,
    compute_compensation,
    learn_transferred_dictionary,
    match_atoms_to_source,
    match_target_pixels,
    transfer,
)
from specsr.types import CompensationMatrix, SpectralCube, SpectralDictionary, SpectralResponse

from conftest import block_srf


def objective(L, Q, residual, eta, k, Z):
    return (
        np.linalg.norm(residual - L @ Q) ** 2
        + eta * np.linalg.norm(Q - k * Z) ** 2
    )


def gradient(L, Q, residual, eta, k, Z):
    return 2 * L.T @ (L @ Q - residual) + 2 * eta * (Q - k * Z)


def gradient_descent_minimizer(L, residual, eta, k, Z, tol=1e-10, max_iters=100000):
    """Steepest descent with exact line search on the quadratic objective."""
    Q = np.zeros((L.shape[1], Z.shape[1]))
    for _ in range(max_iters):
        g = gradient(L, Q, residual, eta, k, Z)
        gnorm = np.linalg.norm(g)
        if gnorm < tol:
            break
        Hg = 2 * L.T @ (L @ g) + 2 * eta * g
        step = gnorm**2 / float(np.sum(g * Hg))
        Q = Q - step * g
    return Q


def unit_dictionary(rng, bands, atoms):
    cols = rng.standard_normal((bands, atoms))
    cols /= np.linalg.norm(cols, axis=0)
    return SpectralDictionary(columns=cols)


def random_matched(rng, lx=8, ly=3, K=5):
    L = np.abs(rng.standard_normal((ly, lx)))
    srf = SpectralResponse(weights=L)
    z = rng.standard_normal((lx, K))
    zy = L @ z
    y = rng.standard_normal((ly, K))
    matched = MatchedSet(
        z_matched=z, zy_matched=zy, y_matched=y,
        source_pixel_index=np.arange(K), target_pixel_index=np.arange(K),
    )
    return matched, srf


class TestMatchAtomsToSource:
    def test_exact_atom_pixels_recovered(self, rng):
        d = unit_dictionary(rng, 6, 4)
        filler = rng.standard_normal((6, 4)) * 5.0
        pixels = np.column_stack([filler[:, :2], d.columns, filler[:, 2:]])
        Z = SpectralCube.from_matrix(pixels, 1, pixels.shape[1])
        zs, idx = match_atoms_to_source(d, Z, "euclidean")
        assert np.array_equal(idx, np.arange(2, 6))
        assert np.allclose(zs, d.columns, atol=1e-12)

    def test_single_atom_matches_exhaustive_scan(self, rng):
        d = unit_dictionary(rng, 7, 1)
        Z = SpectralCube(bands=7, rows=5, cols=6, data=rng.standard_normal(210))
        zs, idx = match_atoms_to_source(d, Z, "euclidean")
        Zm = Z.as_matrix()
        dists = []
        for j in range(Zm.shape[1]):
            p = Zm[:, j]
            n = np.linalg.norm(p)
            dists.append(np.inf if n == 0 else np.linalg.norm(p / n - d.columns[:, 0]))
        assert idx[0] == int(np.argmin(dists))
        assert np.array_equal(zs[:, 0], Zm[:, idx[0]])

    def test_spectral_angle_scale_invariant(self, rng):
        d = unit_dictionary(rng, 6, 3)
        Z = SpectralCube(bands=6, rows=4, cols=4, data=rng.standard_normal(96))
        _, idx1 = match_atoms_to_source(d, Z, "spectral_angle")
        scaled = SpectralCube(bands=6, rows=4, cols=4, data=3.0 * Z.data)
        _, idx2 = match_atoms_to_source(d, scaled, "spectral_angle")
        assert np.array_equal(idx1, idx2)

    def test_idempotent_rematching(self, rng):
        d = unit_dictionary(rng, 6, 4)
        Z = SpectralCube(bands=6, rows=8, cols=8, data=rng.standard_normal(384))
        zs, _ = match_atoms_to_source(d, Z, "euclidean")
        again, idx = match_atoms_to_source(
            d, SpectralCube.from_matrix(zs, 1, zs.shape[1]), "euclidean"
        )
        assert np.array_equal(idx, np.arange(4))
        assert np.array_equal(again, zs)

    def test_band_mismatch_rejected(self, rng):
        d = unit_dictionary(rng, 6, 4)
        Z = SpectralCube(bands=5, rows=2, cols=2, data=rng.standard_normal(20))
        with pytest.raises(ValueError, match="bands"):
            match_atoms_to_source(d, Z)

    def test_all_zero_cube_rejected(self, rng):
        d = unit_dictionary(rng, 6, 2)
        Z = SpectralCube(bands=6, rows=2, cols=2, data=np.zeros(24))
        with pytest.raises(ValueError, match="nonzero"):
            match_atoms_to_source(d, Z)


class TestMatchTargetPixels:
    def test_exact_columns_recovered(self, rng):
        targets = rng.standard_normal((3, 4))
        filler = rng.standard_normal((3, 5)) * 7.0
        Y = SpectralCube.from_matrix(np.column_stack([filler, targets]), 1, 9)
        ys, idx = match_target_pixels(targets, Y, "euclidean")
        assert np.array_equal(ys, targets)
        assert np.array_equal(idx, np.arange(5, 9))

    def test_matches_exhaustive_scan(self, rng):
        target = rng.standard_normal((3, 1))
        Y = SpectralCube(bands=3, rows=6, cols=5, data=rng.standard_normal(90))
        _, idx = match_target_pixels(target, Y, "euclidean")
        Ym = Y.as_matrix()
        dists = [np.linalg.norm(Ym[:, j] - target[:, 0]) for j in range(30)]
        assert idx[0] == int(np.argmin(dists))

    def test_pixel_permutation_consistency(self, rng):
        targets = rng.standard_normal((3, 4))
        Ym = rng.standard_normal((3, 24))
        Y = SpectralCube.from_matrix(Ym, 4, 6)
        ys1, idx1 = match_target_pixels(targets, Y, "euclidean")
        perm = rng.permutation(24)
        Yp = SpectralCube.from_matrix(Ym[:, perm], 4, 6)
        ys2, idx2 = match_target_pixels(targets, Yp, "euclidean")
        assert np.array_equal(ys1, ys2)
        assert np.array_equal(perm[idx2], idx1)

    def test_spectral_angle_excludes_zero_pixels(self, rng):
        targets = rng.standard_normal((3, 2))
        Ym = rng.standard_normal((3, 8))
        Ym[:, 0] = 0.0
        Y = SpectralCube.from_matrix(Ym, 2, 4)
        _, idx = match_target_pixels(targets, Y, "spectral_angle")
        assert 0 not in idx


class TestComputeCompensation:
    def test_zero_gap_zero_target_gives_zero(self, rng):
        matched, srf = random_matched(rng)
        matched = MatchedSet(
            z_matched=matched.z_matched,
            zy_matched=matched.zy_matched,
            y_matched=matched.zy_matched.copy(),
            source_pixel_index=matched.source_pixel_index,
            target_pixel_index=matched.target_pixel_index,
        )
        q = compute_compensation(matched, srf, eta=0.5, k_scale=0.0)
        assert np.all(q.values == 0.0)

    def test_ridge_limit_shrinks_to_zero(self, rng):
        matched, srf = random_matched(rng)
        q = compute_compensation(matched, srf, eta=1e9, k_scale=0.0)
        assert np.linalg.norm(q.values) < 1e-6 * np.linalg.norm(matched.z_matched)

    def test_gradient_vanishes_at_solution(self, rng):
        matched, srf = random_matched(rng)
        eta, k = 0.5, 0.1
        q = compute_compensation(matched, srf, eta, k)
        g = gradient(
            srf.weights, q.values, matched.y_matched - matched.zy_matched,
            eta, k, matched.z_matched,
        )
        assert np.linalg.norm(g) < 1e-8

    def test_matches_gradient_descent_minimizer(self, rng):
        matched, srf = random_matched(rng)
        eta, k = 0.5, 0.1
        residual = matched.y_matched - matched.zy_matched
        q = compute_compensation(matched, srf, eta, k).values
        q_gd = gradient_descent_minimizer(srf.weights, residual, eta, k, matched.z_matched)
        f_cf = objective(srf.weights, q, residual, eta, k, matched.z_matched)
        f_gd = objective(srf.weights, q_gd, residual, eta, k, matched.z_matched)
        assert abs(f_cf - f_gd) <= 1e-6 * max(1.0, abs(f_gd))

    def test_beats_random_perturbations(self, rng):
        matched, srf = random_matched(rng)
        eta, k = 0.5, 0.1
        residual = matched.y_matched - matched.zy_matched
        q = compute_compensation(matched, srf, eta, k).values
        f0 = objective(srf.weights, q, residual, eta, k, matched.z_matched)
        for _ in range(10_000):
            delta = rng.standard_normal(q.shape) * 1e-3
            assert f0 <= objective(
                srf.weights, q + delta, residual, eta, k, matched.z_matched
            ) + 1e-12

    def test_eta_must_be_positive(self, rng):
        matched, srf = random_matched(rng)
        with pytest.raises(ValueError, match="eta"):
            compute_compensation(matched, srf, eta=0.0)


class TestLearnTransferredDictionary:
    def test_zero_compensation_equals_plain_ksvd(self, rng):
        matched, srf = random_matched(rng, lx=8, ly=3, K=6)
        cfg = KsvdConfig(atoms=4, sparsity=OmpConfig(max_atoms=2), iterations=5, seed=9)
        q = CompensationMatrix(values=np.zeros((8, 6)))
        d1 = learn_transferred_dictionary(matched, q, cfg)
        d2 = ksvd(matched.z_matched, cfg).dictionary
        assert d1.columns.tobytes() == d2.columns.tobytes()

    def test_self_representation_limit(self, rng):
        matched, srf = random_matched(rng, lx=8, ly=3, K=6)
        q = CompensationMatrix(values=0.1 * rng.standard_normal((8, 6)))
        cfg = KsvdConfig(atoms=6, sparsity=OmpConfig(max_atoms=1), iterations=25, seed=0)
        d = learn_transferred_dictionary(matched, q, cfg)
        compensated = matched.z_matched + q.values
        from specsr.sparse_coding import batch_code

        codes = batch_code(d, compensated, OmpConfig(max_atoms=1))
        residual = np.linalg.norm(compensated - d.columns @ codes.values)
        assert residual < 1e-6 * np.linalg.norm(compensated)


class TestTransfer:
    def _scene(self, rng, bands=12, endmembers=5, pixels=200):
        from specsr.scenes import generate_endmembers

        E = generate_endmembers(bands, endmembers, seed=17)
        weights = rng.dirichlet(np.ones(2), size=pixels)
        supports = np.array(
            [rng.choice(endmembers, 2, replace=False) for _ in range(pixels)]
        )
        pix = np.stack(
            [E[:, supports[j]] @ weights[j] for j in range(pixels)], axis=1
        )
        return SpectralCube.from_matrix(pix, 10, 20)

    def test_no_shift_limit(self, rng):
        Z = self._scene(rng)
        srf = block_srf(12, 3)
        Ym = srf.weights @ Z.as_matrix()
        Y = SpectralCube.from_matrix(Ym, Z.rows, Z.cols)
        d_s = ksvd(
            Z.as_matrix(),
            KsvdConfig(atoms=5, sparsity=OmpConfig(max_atoms=2), iterations=10, seed=0),
        ).dictionary
        cfg = TransferConfig(
            eta=1e6, k_scale=0.0,
            ksvd=KsvdConfig(atoms=5, sparsity=OmpConfig(max_atoms=2), iterations=10, seed=0),
        )
        result = transfer(d_s, Z, Y, srf, cfg)
        assert np.linalg.norm(result.compensation.values) < 1e-5
        plain = ksvd(result.matched.z_matched, cfg.ksvd).dictionary
        assert np.abs(result.dictionary.columns - plain.columns).max() < 1e-6

    def test_constant_shift_recovered_in_compensation(self, rng):
        Z = self._scene(rng)
        srf = block_srf(12, 3)
        delta = np.full(12, 0.15)
        X = SpectralCube.from_matrix(Z.as_matrix() + delta[:, None], Z.rows, Z.cols)
        Y = SpectralCube.from_matrix(srf.weights @ X.as_matrix(), Z.rows, Z.cols)
        d_s = ksvd(
            Z.as_matrix(),
            KsvdConfig(atoms=5, sparsity=OmpConfig(max_atoms=2), iterations=10, seed=0),
        ).dictionary
        result = transfer(d_s, Z, Y, srf, TransferConfig(eta=0.01))
        mean_q = result.compensation.values.mean(axis=1)
        cos = mean_q @ delta / (np.linalg.norm(mean_q) * np.linalg.norm(delta))
        assert cos > 0.8

    def test_deterministic(self, rng):
        Z = self._scene(rng)
        srf = block_srf(12, 3)
        Y = SpectralCube.from_matrix(srf.weights @ Z.as_matrix() + 0.05, Z.rows, Z.cols)
        d_s = ksvd(
            Z.as_matrix(),
            KsvdConfig(atoms=5, sparsity=OmpConfig(max_atoms=2), iterations=5, seed=0),
        ).dictionary
        cfg = TransferConfig(
            eta=0.1, ksvd=KsvdConfig(atoms=5, sparsity=OmpConfig(max_atoms=2), iterations=5, seed=3)
        )
        a = transfer(d_s, Z, Y, srf, cfg)
        b = transfer(d_s, Z, Y, srf, cfg)
        assert a.dictionary.columns.tobytes() == b.dictionary.columns.tobytes()

    def test_matched_set_degradation_invariant(self, rng):
        Z = self._scene(rng)
        srf = block_srf(12, 3)
        Y = SpectralCube.from_matrix(srf.weights @ Z.as_matrix(), Z.rows, Z.cols)
        d_s = ksvd(
            Z.as_matrix(),
            KsvdConfig(atoms=5, sparsity=OmpConfig(max_atoms=2), iterations=5, seed=0),
        ).dictionary
        result = transfer(d_s, Z, Y, srf, TransferConfig())
        gap = result.matched.zy_matched - srf.weights @ result.matched.z_matched
        assert np.abs(gap).max() < 1e-10
