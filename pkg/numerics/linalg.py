#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
流水线所需的稠密与稀疏线性代数：广义对称特征值、复稀疏求解、SVD、QR 与稠密求解。
全部委托给 scipy，本模块只负责统一的契约检查和错误类型。
"""

from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from loguru import logger

from config.settings import SETTINGS
from numerics.errors import ConvergenceError, SingularSystemError

# 维数不超过该值时直接使用稠密求解器
DENSE_LIMIT = 400
EIG_RESIDUAL_TOL = 1e-8
SOLVE_RESIDUAL_TOL = 1e-10


def check_symmetric(A, rtol: float = 1e-12) -> None:
    """结构与数值对称性检查"""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"矩阵不是方阵: {A.shape}")
    scale = abs(A).max() if A.nnz else 0.0
    defect = abs(A - A.T).max() if A.nnz else 0.0
    if defect > rtol * max(scale, 1.0):
        raise ValueError(f"矩阵不对称，偏差 {defect:.3g}")


def _m_normalize(M, vectors: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->j", vectors.conj(), M @ vectors).real)
    return vectors / norms


def generalized_eigs(K, M, n: int, shift: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    求解 K v = λ M v 的前 n 个特征对（升序），特征向量 M-正交归一。

    小规模问题用稠密 eigh，否则用以 shift 为中心的 shift-invert Lanczos。

    Raises:
        ConvergenceError: Lanczos 未收敛或残差超标，附带已得到的残差。
    """
    dim = K.shape[0]
    if n > dim:
        raise ValueError(f"请求 {n} 个特征对，但维数只有 {dim}")
    shift = SETTINGS.fem_config["eig_shift"] if shift is None else shift

    if dim <= DENSE_LIMIT or n >= dim - 1:
        dense_K = K.toarray() if sp.issparse(K) else np.asarray(K)
        dense_M = M.toarray() if sp.issparse(M) else np.asarray(M)
        values, vectors = sla.eigh(dense_K, dense_M, subset_by_index=[0, n - 1])
    else:
        try:
            values, vectors = spla.eigsh(sp.csc_matrix(K), k=n, M=sp.csc_matrix(M), sigma=shift, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"Lanczos 只收敛了 {len(exc.eigenvalues)}/{n} 个特征对", partial=np.sort(exc.eigenvalues),
            ) from exc

    order = np.argsort(values)
    values = np.asarray(values[order], dtype=float)
    vectors = _m_normalize(M, np.asarray(vectors[:, order]))

    KV = K @ vectors
    MV = M @ vectors
    residuals = np.linalg.norm(KV - MV * values, axis=0)
    scales = np.maximum(np.linalg.norm(KV, axis=0), np.linalg.norm(MV, axis=0))
    relative = residuals / np.maximum(scales, np.finfo(float).tiny)
    if np.max(relative) > EIG_RESIDUAL_TOL:
        raise ConvergenceError(
            f"特征对残差 {np.max(relative):.3g} 超过 {EIG_RESIDUAL_TOL}", partial=values, residuals=relative,
        )
    logger.debug(f"广义特征值求解完成: 维数 {dim}, n={n}, 最大相对残差 {np.max(relative):.2e}")
    return values, vectors


def svd(A) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A = U Σ V*，Σ 降序非负；返回 (U, Σ, V)"""
    A = np.asarray(A, dtype=complex)
    try:
        U, sigma, Vh = sla.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.warning("gesdd 未收敛，改用 gesvd")
        U, sigma, Vh = sla.svd(A, full_matrices=False, lapack_driver="gesvd")
    return U, sigma, Vh.conj().T


def qr(A) -> Tuple[np.ndarray, np.ndarray]:
    """经济型 QR 分解"""
    Q, R = sla.qr(np.asarray(A, dtype=complex), mode="economic")
    return Q, R


def condition_estimate(A) -> float:
    A = np.asarray(A, dtype=complex)
    if not np.all(np.isfinite(A)):
        return float("inf")
    return float(np.linalg.cond(A))


def solve_dense(A, B, condition_limit: Optional[float] = None) -> np.ndarray:
    """
    稠密复线性方程组。

    Raises:
        SingularSystemError: 条件数超过 condition_limit（默认取配置值）。
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    limit = SETTINGS.scattering_config["condition_limit"] if condition_limit is None else condition_limit
    condition = condition_estimate(A)
    if not np.isfinite(condition) or condition > limit:
        raise SingularSystemError(f"矩阵在工作精度下奇异（条件数 {condition:.3g}）", condition=condition)
    X = sla.solve(A, B)
    residual = np.linalg.norm(A @ X - B) / max(np.linalg.norm(B), np.finfo(float).tiny)
    if residual > SOLVE_RESIDUAL_TOL:
        logger.warning(f"稠密求解相对残差 {residual:.3g}，条件数 {condition:.3g}")
    return X


def factorize_sparse(S) -> spla.SuperLU:
    """稀疏 LU 分解，可复用于多个右端项"""
    try:
        return spla.splu(sp.csc_matrix(S))
    except RuntimeError as exc:
        raise SingularSystemError(f"稀疏矩阵分解失败: {exc}") from exc


def solve_sparse_complex(S, b, factorization: Optional[spla.SuperLU] = None) -> np.ndarray:
    """
    复稀疏方程组 S x = b，b 可以是多列右端项。

    Raises:
        SingularSystemError: 分解失败或解不是有限值。
    """
    lu = factorization if factorization is not None else factorize_sparse(S)
    b = np.asarray(b, dtype=complex)
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("稀疏求解得到非有限值")
    residual = np.linalg.norm(S @ x - b) / max(np.linalg.norm(b), np.finfo(float).tiny)
    if residual > SOLVE_RESIDUAL_TOL:
        logger.warning(f"稀疏求解相对残差 {residual:.3g}")
    return x
