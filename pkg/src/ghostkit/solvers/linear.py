"""Least-squares reconstruction and realization partitioning.

CGLS started from zero converges to the minimum-norm least-squares solution,
so ``cgls_reconstruct`` plays the role of the pseudo-inverse ``W^+ y``.
Partitions shuffle the realization indices and slice the shuffled order into
``K`` contiguous chunks; when ``K`` does not divide ``M`` the earlier chunks
receive the extra element.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ghostkit.acquisition.masks import BucketVector, MaskSet, as_image
from ghostkit.acquisition.rng import RandomStream
from ghostkit.errors import ComputationError, ConfigError, ShapeError
from ghostkit.parallel import parallel_map

logger = logging.getLogger(__name__)

Buckets = Union[BucketVector, np.ndarray]


@dataclass(frozen=True)
class CglsConfig:
    """Stopping rule for conjugate gradients on the normal equations."""
    max_iters: int = 100
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be non-negative, got {self.max_iters}")
        if self.tol < 0:
            raise ConfigError(f"tol must be non-negative, got {self.tol}")


@dataclass
class CglsResult:
    """Solution vector plus the residual norm ``||A x - y||`` after every iteration."""
    x: np.ndarray
    residual_history: List[float]
    iterations: int
    convergence_reason: str


def _bucket_values(y: Buckets) -> np.ndarray:
    values = y.values if isinstance(y, BucketVector) else y
    return np.asarray(values, dtype=np.float64).reshape(-1)


def cgls(A: np.ndarray, y: np.ndarray, config: Optional[CglsConfig] = None) -> CglsResult:
    """Solve ``min ||A x - y||`` with CGLS from ``x = 0``.

    Stops after ``max_iters`` or once either the relative residual
    ``||r|| / ||y||`` or the relative normal-equation residual drops below
    ``tol``.
    """
    config = config or CglsConfig()
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if A.ndim != 2:
        raise ShapeError("cgls", "rank", 2, A.ndim)
    if A.shape[0] != y.size:
        raise ShapeError("cgls", "M", A.shape[0], y.size)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise ConfigError("cgls: non-finite values in the system")

    x = np.zeros(A.shape[1], dtype=np.float64)
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return CglsResult(x, [0.0], 0, "zero_data")

    r = y.copy()
    s = A.T @ r
    p = s.copy()
    gamma = float(s @ s)
    s0_norm = np.sqrt(gamma)
    history = [y_norm]
    reason = "max_iterations"
    iterations = 0
    if s0_norm == 0.0:
        return CglsResult(x, history, 0, "zero_gradient")

    for iterations in range(1, config.max_iters + 1):
        q = A @ p
        q_norm2 = float(q @ q)
        if q_norm2 == 0.0:
            reason = "breakdown"
            iterations -= 1
            break
        alpha = gamma / q_norm2
        x += alpha * p
        r -= alpha * q
        s = A.T @ r
        gamma_next = float(s @ s)
        residual = float(np.linalg.norm(r))
        history.append(residual)
        if not np.isfinite(residual):
            raise ComputationError("cgls: residual became non-finite", trace=history)
        if residual / y_norm < config.tol:
            reason = "residual_tolerance"
            break
        if np.sqrt(gamma_next) / s0_norm < config.tol:
            reason = "normal_tolerance"
            break
        p = s + (gamma_next / gamma) * p
        gamma = gamma_next

    return CglsResult(x, history, iterations, reason)


def cgls_reconstruct(W: MaskSet, y: Buckets, config: Optional[CglsConfig] = None) -> np.ndarray:
    """Least-squares image ``W^+ y`` computed with CGLS."""
    values = _bucket_values(y)
    if values.size != W.M:
        raise ShapeError("cgls_reconstruct", "M", W.M, values.size)
    result = cgls(W.matrix, values, config)
    logger.debug(
        "cgls: %d iterations (%s), residual %.3e", result.iterations, result.convergence_reason,
        result.residual_history[-1],
    )
    return result.x.reshape(W.shape)


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------

@dataclass
class PartitionPlan:
    """``index_lists[p][k]``: realization indices of split ``k`` in permutation ``p``."""
    K: int
    P: int
    M: int
    seed: int
    index_lists: List[List[np.ndarray]] = field(default_factory=list)

    def splits(self, p: int) -> List[np.ndarray]:
        return self.index_lists[p]

    def pairs(self) -> List[Tuple[int, int]]:
        """``(p, k)`` pairs in permutation-major order."""
        return [(p, k) for p in range(self.P) for k in range(self.K)]


@dataclass
class SubDataset:
    """One split: the aligned subset of masks and buckets plus parent indices."""
    masks: MaskSet
    buckets: BucketVector
    indices: np.ndarray
    permutation: int = 0
    split: int = 0


def split_sizes(M: int, K: int) -> List[int]:
    base, extra = divmod(M, K)
    return [base + 1 if k < extra else base for k in range(K)]


def make_partition_plan(M: int, K: int, P: int, seed: int) -> PartitionPlan:
    """``P`` independent shuffles of ``range(M)``, each sliced into ``K`` chunks."""
    if K < 1 or P < 1:
        raise ConfigError(f"K and P must be at least 1, got K={K}, P={P}")
    if K > M:
        raise ConfigError(f"cannot split {M} realizations into {K} non-empty splits")
    sizes = split_sizes(M, K)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    index_lists = []
    for p in range(P):
        order = RandomStream(seed, f"split-permutation-{p}").permutation(M)
        index_lists.append([order[bounds[k]:bounds[k + 1]] for k in range(K)])
    return PartitionPlan(K=K, P=P, M=M, seed=seed, index_lists=index_lists)


def _subsets(plan: PartitionPlan, W: MaskSet, y: BucketVector) -> List[SubDataset]:
    return [
        SubDataset(W.subset(idx), y.subset(idx), idx, permutation=p, split=k)
        for p, splits in enumerate(plan.index_lists)
        for k, idx in enumerate(splits)
    ]


def _as_buckets(W: MaskSet, y: Buckets) -> BucketVector:
    buckets = y if isinstance(y, BucketVector) else BucketVector(y)
    if len(buckets) != W.M:
        raise ShapeError("partition", "M", W.M, len(buckets))
    return buckets


def split_realizations(W: MaskSet, y: Buckets, K: int, seed: int) -> List[SubDataset]:
    """Shuffle the realizations and slice them into ``K`` near-equal splits."""
    buckets = _as_buckets(W, y)
    return _subsets(make_partition_plan(W.M, K, 1, seed), W, buckets)


def permuted_splits(
    W: MaskSet, y: Buckets, K: int, P: int, seed: int
) -> Tuple[PartitionPlan, List[SubDataset]]:
    """``K * P`` sub-datasets in permutation-major order; ``P = 1`` matches :func:`split_realizations`."""
    buckets = _as_buckets(W, y)
    plan = make_partition_plan(W.M, K, P, seed)
    return plan, _subsets(plan, W, buckets)


def sub_reconstruct_all(
    subsets: Sequence[SubDataset],
    config: Optional[CglsConfig] = None,
    workers: int = 1,
) -> List[np.ndarray]:
    """Least-squares image of every sub-dataset, in input order."""
    return parallel_map(lambda sub: cgls_reconstruct(sub.masks, sub.buckets, config), subsets, workers)


# ---------------------------------------------------------------------------
# Noise decomposition
# ---------------------------------------------------------------------------

PROBE_CGLS = CglsConfig(max_iters=1000, tol=1e-13)


@dataclass
class NoiseDecomposition:
    """``x_k = base + nullspace + noise`` for one sub-reconstruction."""
    base: np.ndarray
    nullspace: np.ndarray
    noise: np.ndarray
    annihilation_ratio: float  # ||W_k v_k|| / (||W_k||_F ||v_k||), 0 when v_k vanishes


def nullspace_probe(
    sub: SubDataset,
    x_k: np.ndarray,
    reference: np.ndarray,
    config: Optional[CglsConfig] = None,
    tolerance: float = 1e-8,
) -> NoiseDecomposition:
    """Split a sub-reconstruction into ground truth, null-space and noise parts.

    ``t_k`` is the least-squares image of the split's noise ``y_k - W_k x*``
    and ``v_k = x_k - x* - t_k``. Raises :class:`ComputationError` when
    ``W_k`` does not annihilate ``v_k``; a numerically vanishing ``v_k`` is
    not checked.
    """
    reference = as_image(reference, "reference")
    x_k = as_image(x_k, "x_k")
    if reference.shape != sub.masks.shape:
        raise ShapeError("nullspace_probe", "image", sub.masks.shape, reference.shape)
    if x_k.shape != reference.shape:
        raise ShapeError("nullspace_probe", "image", reference.shape, x_k.shape)

    Wk = sub.masks.matrix
    epsilon = sub.buckets.values - Wk @ reference.reshape(-1)
    t_k = cgls(Wk, epsilon, config or PROBE_CGLS).x.reshape(reference.shape)
    v_k = x_k - reference - t_k

    v_norm = float(np.linalg.norm(v_k))
    scale = max(float(np.linalg.norm(x_k)), float(np.linalg.norm(reference)), 1.0)
    ratio = 0.0
    if v_norm > 1e-8 * scale:
        ratio = float(np.linalg.norm(Wk @ v_k.reshape(-1)) / (np.linalg.norm(Wk) * v_norm))
        if ratio > tolerance:
            raise ComputationError(
                f"null-space component is not annihilated by W_k (ratio {ratio:.3e} > {tolerance:.1e})"
            )
    return NoiseDecomposition(base=reference, nullspace=v_k, noise=t_k, annihilation_ratio=ratio)
