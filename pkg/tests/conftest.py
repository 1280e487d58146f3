import numpy as np
import pytest

from specsr.types import SpectralCube, SpectralResponse


def block_srf(in_bands: int = 31, out_bands: int = 4) -> SpectralResponse:
    """Row-normalized band-averaging response: contiguous blocks of inputs."""
    edges = np.linspace(0, in_bands, out_bands + 1).astype(int)
    weights = np.zeros((out_bands, in_bands))
    for row, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        weights[row, a:b] = 1.0 / (b - a)
    return SpectralResponse(weights=weights, row_normalized=True)


def random_cube(rng: np.random.Generator, bands: int, rows: int, cols: int) -> SpectralCube:
    return SpectralCube(
        bands=bands, rows=rows, cols=cols,
        data=rng.standard_normal(bands * rows * cols),
    )


def low_coherence_dictionary(
    bands: int, atoms: int, seed: int, target: float = 0.28, iters: int = 300
) -> tuple[np.ndarray, float]:
    """Unit-norm frame with small mutual coherence via alternating projection.

    Random Gaussian frames of this aspect ratio sit near coherence ~0.55;
    clipping the Gram's off-diagonal and re-factoring walks them down toward
    the Welch bound. Returns (columns, achieved coherence).
    """
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((bands, atoms))
    D /= np.linalg.norm(D, axis=0)
    for _ in range(iters):
        G = D.T @ D
        off = np.abs(G - np.diag(np.diag(G))).max()
        if off < target:
            break
        G = np.clip(G, -target * 0.95, target * 0.95)
        np.fill_diagonal(G, 1.0)
        w, V = np.linalg.eigh(G)
        w = np.clip(w[-bands:], 0.0, None)
        D = (V[:, -bands:] * np.sqrt(w)).T
        D /= np.linalg.norm(D, axis=0)
    G = np.abs(D.T @ D)
    np.fill_diagonal(G, 0.0)
    return D, float(G.max())


def identifiable_sparse_instance(seed: int, n_cols: int = 30):
    """Planted 2-sparse coding problem where recovery is well-posed.

    Recovering a 2-sparse code from 3 measurements is not identifiable for
    arbitrary instances, so planted columns are kept only when (a) greedy
    pursuit against the normalized degraded dictionary selects the planted
    support and (b) the planted code is the minimum-l1 solution of the exact
    fit (LP oracle) -- the limit the tiny-l1 solver converges to.
    Returns (D_t, srf, LD, A_star).
    """
    from scipy.optimize import linprog

    from specsr.sparse_coding import OmpConfig, code_columns
    from specsr.types import SpectralDictionary

    rng = np.random.default_rng(seed)
    cols = rng.standard_normal((8, 8))
    cols /= np.linalg.norm(cols, axis=0)
    D_t = SpectralDictionary(columns=cols)
    srf = SpectralResponse(weights=np.abs(rng.standard_normal((3, 8))))
    LD = srf.weights @ cols
    LDn = LD / np.linalg.norm(LD, axis=0)
    kept = []
    for _ in range(5000):
        if len(kept) == n_cols:
            break
        support = rng.choice(8, size=2, replace=False)
        a = np.zeros(8)
        a[support] = rng.uniform(1.0, 2.0, 2) * rng.choice([-1.0, 1.0], 2)
        y = LD @ a
        _, sup = code_columns(LDn, y, OmpConfig(max_atoms=2))
        if set(sup[0]) != set(support):
            continue
        lp = linprog(
            c=np.ones(16),
            A_eq=np.hstack([LD, -LD]),
            b_eq=y,
            bounds=[(0, None)] * 16,
            method="highs",
        )
        bp = lp.x[:8] - lp.x[8:]
        if lp.success and np.abs(bp - a).max() <= 1e-6:
            kept.append(a)
    assert len(kept) == n_cols, "not enough identifiable columns"
    return D_t, srf, LD, np.column_stack(kept)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
