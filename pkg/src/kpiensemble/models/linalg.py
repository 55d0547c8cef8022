"""
Linear-algebra kernels of the learners: Moore-Penrose pseudoinverse and kernel matrices.

Mathematical context
--------------------
The pseudoinverse $X = A^+$ is the unique matrix satisfying the four Penrose
conditions

- $AXA = A$
- $XAX = X$
- $(XA)^* = XA$
- $(AX)^* = AX$

It is computed from the singular value decomposition $A = U \\Sigma V^*$ as
$A^+ = V \\Sigma^+ U^*$, singular values below
$10^{-12} \\cdot \\max(m, n) \\cdot s_{max}$ being treated as zero.

Kernel matrices: linear $K_{ij} = x_i \\cdot z_j$, RBF
$K_{ij} = \\exp(-\\gamma \\lVert x_i - z_j \\rVert^2)$.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.metrics.pairwise import linear_kernel, rbf_kernel

from ..exceptions import ComputationError, ConfigError, DataError

__all__ = [
    "KernelDescriptor",
    "moore_penrose_pinv",
    "penrose_residuals",
    "kernel_matrix",
    "default_gamma",
]

KERNELS = ("linear", "rbf")


@dataclass(frozen=True)
class KernelDescriptor:
    """
    Kernel choice of the LS-TSVR learner.

    Parameters
    ----------
    kind : {"linear", "rbf"}
    gamma : float, optional
        Positive RBF width; required for ``kind="rbf"``, ignored otherwise.
    """
    kind: str = "linear"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ConfigError(f"Noyau inconnu : {self.kind}. Disponibles : {list(KERNELS)}")
        if self.kind == "rbf" and (self.gamma is None or not self.gamma > 0):
            raise ConfigError(f"Le noyau rbf exige gamma > 0 (reçu {self.gamma}).")

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma}


def moore_penrose_pinv(A) -> np.ndarray:
    r"""
    Moore-Penrose generalized inverse through the SVD.

    Parameters
    ----------
    A : array-like of shape (m, n)
        Finite-valued matrix.

    Returns
    -------
    numpy.ndarray of shape (n, m)

    Raises
    ------
    ComputationError
        If ``A`` holds NaN/Inf or the SVD does not converge.

    Examples
    --------
    >>> moore_penrose_pinv(np.diag([2.0, 0.0]))
    array([[0.5, 0. ],
           [0. , 0. ]])
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise ComputationError(f"Matrice 2D attendue (reçu ndim={A.ndim}).")
    if not np.all(np.isfinite(A)):
        raise ComputationError("Pseudo-inverse impossible : la matrice contient des valeurs non finies.")
    rcond = 1e-12 * max(A.shape)
    try:
        return np.linalg.pinv(A, rcond=rcond)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"Échec de la SVD : {exc}") from exc


def penrose_residuals(A, X) -> np.ndarray:
    """
    Relative Frobenius residuals of the four Penrose conditions.

    Returns
    -------
    numpy.ndarray of shape (4,)
        ``||AXA - A||``, ``||XAX - X||``, ``||(XA)* - XA||``, ``||(AX)* - AX||``,
        each divided by ``||A||`` (resp. ``||X||`` for the second) when non-zero.
    """
    A = np.asarray(A, dtype=float)
    X = np.asarray(X, dtype=float)
    na = np.linalg.norm(A) or 1.0
    nx = np.linalg.norm(X) or 1.0
    XA = X @ A
    AX = A @ X
    return np.array([
        np.linalg.norm(A @ X @ A - A) / na,
        np.linalg.norm(X @ A @ X - X) / nx,
        np.linalg.norm(XA.conj().T - XA) / max(np.linalg.norm(XA), 1.0),
        np.linalg.norm(AX.conj().T - AX) / max(np.linalg.norm(AX), 1.0),
    ])


def kernel_matrix(X, Z, kernel: KernelDescriptor) -> np.ndarray:
    """
    Gram matrix between the rows of ``X`` and of ``Z``.

    Parameters
    ----------
    X : array-like of shape (n, w)
    Z : array-like of shape (m, w)
    kernel : KernelDescriptor

    Returns
    -------
    numpy.ndarray of shape (n, m)

    Raises
    ------
    DataError
        If the row dimensions differ.

    Examples
    --------
    >>> kernel_matrix([[1, 2]], [[1, 2]], KernelDescriptor("linear"))
    array([[5.]])
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != Z.shape[1]:
        raise DataError(f"Dimensions incompatibles : {X.shape[1]} != {Z.shape[1]}")
    if kernel.kind == "linear":
        return linear_kernel(X, Z)
    return rbf_kernel(X, Z, gamma=kernel.gamma)


def default_gamma(X) -> float:
    """
    RBF width heuristic ``1 / (window * var(X))``.

    Falls back to ``1 / window`` when the training windows have no variance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    var = float(X.var())
    window = X.shape[1]
    return 1.0 / (window * var) if var > 0 else 1.0 / window
