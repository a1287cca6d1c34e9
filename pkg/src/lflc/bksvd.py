"""Randomized block-Krylov low-rank approximation of stacked layer matrices.

For each colour channel the three layers are stacked vertically into a
3m x n matrix B.  A Gaussian block is iterated through the Krylov subspace
[B*Pi, (B*B^T)B*Pi, ..., (B*B^T)^(q-1) B*Pi]; orthonormalizing its columns
gives Q, and the small matrix S = Q^T B B^T Q is eigendecomposed to extract
the rank-k basis W = Q * U_k.  The projection W W^T B is within (1+eps) of
the optimal spectral-norm error with high probability once q grows like
log(dim)/sqrt(eps).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import BadRowCount, RankTooLarge
from .layers import LayerStack


@dataclass(frozen=True)
class KrylovConfig:
    rank: int
    epsilon: float = 0.1
    iterations: int | None = None  # None -> default_iterations rule
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise RankTooLarge("rank must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def default_iterations(dim, epsilon):
    """Block count rule q = ceil(ln(dim)/sqrt(eps)), clamped to [2, 10]."""
    q = math.ceil(math.log(max(dim, 2)) / math.sqrt(epsilon))
    return min(10, max(2, q))


@dataclass(frozen=True)
class LowRankResult:
    W: np.ndarray             # orthonormal columns, rank-k basis of the row space of B^T
    approx: np.ndarray        # W @ (W.T @ B)
    achieved_error: float     # ||B - approx||_2


def stack_channels(stack: LayerStack):
    """Vertically stack the z = -1, 0, +1 layers per colour channel.

    Returns (B_r, B_g, B_b); each is (3m, n) with rows [0, m) from layer -1,
    [m, 2m) from layer 0 and [2m, 3m) from layer +1.
    """
    v = stack.values
    return tuple(np.concatenate([v[0, :, :, ch], v[1, :, :, ch], v[2, :, :, ch]], axis=0)
                 for ch in range(3))


def unstack_layers(channel_mats, view_shape) -> LayerStack:
    """Inverse of stack_channels; values are clamped back into [0, 1]."""
    mats = [np.asarray(b, dtype=np.float64) for b in channel_mats]
    rows, cols = mats[0].shape
    if rows % 3 != 0 or any(b.shape != (rows, cols) for b in mats):
        raise BadRowCount(f"channel matrices must share a (3m, n) shape, got "
                          f"{[b.shape for b in mats]}")
    m = rows // 3
    values = np.empty((3, m, cols, 3))
    for ch, b in enumerate(mats):
        for zi in range(3):
            values[zi, :, :, ch] = b[zi * m:(zi + 1) * m]
    return LayerStack(np.clip(values, 0.0, 1.0), view_shape)


def block_krylov_lowrank(B, cfg: KrylovConfig) -> LowRankResult:
    """(1+eps) spectral-norm low-rank approximation of B on a Krylov subspace.

    The Gaussian start block is drawn from cfg.seed, every Krylov block is
    re-orthonormalized before the next (B B^T) application (span-preserving,
    avoids overflow of the matrix powers), and the final QR uses column
    pivoting so numerically dependent columns are dropped.  An all-zero B
    yields a zero approximation rather than an error.
    """
    B = np.asarray(B, dtype=np.float64)
    rows, cols = B.shape
    k = cfg.rank
    if k > min(rows, cols):
        raise RankTooLarge(f"rank {k} exceeds min dims of {B.shape}")
    q = cfg.iterations if cfg.iterations is not None else default_iterations(
        max(rows, cols), cfg.epsilon)

    if not np.any(B):
        w = np.eye(rows, k)
        return LowRankResult(w, np.zeros_like(B), 0.0)

    rng = np.random.default_rng(cfg.seed)
    pi = rng.standard_normal((cols, k))
    blocks = []
    y = B @ pi
    for _ in range(q):
        qi, _ = np.linalg.qr(y)
        blocks.append(qi)
        y = B @ (B.T @ qi)
    krylov = np.concatenate(blocks, axis=1)

    qmat, r, _ = scipy.linalg.qr(krylov, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(krylov.shape) * np.finfo(np.float64).eps if diag.size else 0.0
    rank_k = int(np.sum(diag > tol))
    qmat = qmat[:, :max(rank_k, 1)]

    c = qmat.T @ B
    s = c @ c.T
    s = 0.5 * (s + s.T)
    evals, evecs = np.linalg.eigh(s)
    top = evecs[:, ::-1][:, :k]
    w = qmat @ top
    approx = w @ (w.T @ B)
    err = float(np.linalg.norm(B - approx, 2))
    return LowRankResult(w, approx, err)


def spectral_error_ratio(B, result: LowRankResult, oracle_sigma: float) -> float:
    """||B - W W^T B||_2 / sigma_{k+1}, with the zero-spectrum conventions.

    oracle_sigma is the (k+1)-th singular value from an independent dense
    SVD.  When it is zero the ratio is 0 for a (numerically) zero residual
    and +inf otherwise.
    """
    B = np.asarray(B, dtype=np.float64)
    residual = float(np.linalg.norm(B - result.W @ (result.W.T @ B), 2))
    if oracle_sigma <= 0.0:
        scale = float(np.linalg.norm(B, 2))
        return 0.0 if residual <= 1e-6 * max(scale, 1e-300) else math.inf
    return residual / oracle_sigma


def approximate_stack(stack: LayerStack, cfg: KrylovConfig):
    """Stack channels, approximate each at cfg.rank, and rebuild the LayerStack.

    Channels use seeds cfg.seed, cfg.seed+1, cfg.seed+2 so their Gaussian
    draws are independent.  Returns (approximated stack, per-channel results).
    """
    mats = stack_channels(stack)
    results = tuple(
        block_krylov_lowrank(b, replace(cfg, seed=cfg.seed + ch))
        for ch, b in enumerate(mats))
    approx = unstack_layers([r.approx for r in results], stack.view_shape)
    return approx, results
