"""
Least-squares twin support vector regression (LS-TSVR) forecaster.

Mathematical context
--------------------
Training rows are lag windows $x_i = (y_i, \\dots, y_{i+w-1})$ with target
$y_{i+w}$. With $G = [K(X, X^T)\\; e]$ and $G^+$ its Moore-Penrose inverse, the
down-bound and up-bound regressors are the closed-form least-squares
solutions

$$
[\\omega_1; b_1] = G^+ (Y - \\varepsilon_1 e), \\qquad
[\\omega_2; b_2] = G^+ (Y + \\varepsilon_2 e)
$$

and the prediction is their average

$$
f(x) = \\tfrac12 K(x, X^T)(\\omega_1 + \\omega_2) + \\tfrac12 (b_1 + b_2).
$$

Substituting the equality constraints makes both objective terms the same
residual, so the penalties $C_1, C_2$ drop out; they are kept on the model
record but do not influence the fit.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ConfigError, DataError
from .base import BaseForecaster
from .linalg import KernelDescriptor, default_gamma, kernel_matrix, moore_penrose_pinv

logger = logging.getLogger(__name__)

__all__ = ["LsTsvrModel", "LsTsvrForecaster", "lag_matrix", "lstsvr_fit", "lstsvr_predict"]


@dataclass(frozen=True, eq=False)
class LsTsvrModel:
    """
    Fitted LS-TSVR regressor.

    Parameters
    ----------
    support_inputs : numpy.ndarray of shape (n, w)
        Training windows ``X``.
    omega1, omega2 : numpy.ndarray of shape (n,)
        Kernel weights of the down- and up-bound regressors.
    b1, b2 : float
        Biases.
    eps1, eps2 : float
        Tube parameters.
    c1, c2 : float
        Penalties (inert in the closed form).
    kernel : KernelDescriptor
    """
    support_inputs: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    b1: float
    b2: float
    eps1: float
    eps2: float
    c1: float
    c2: float
    kernel: KernelDescriptor

    @property
    def window(self) -> int:
        return self.support_inputs.shape[1]

    def to_dict(self):
        return {
            "support_inputs": self.support_inputs.tolist(),
            "omega1": self.omega1.tolist(),
            "omega2": self.omega2.tolist(),
            "b1": self.b1, "b2": self.b2,
            "eps1": self.eps1, "eps2": self.eps2,
            "c1": self.c1, "c2": self.c2,
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            support_inputs=np.asarray(data["support_inputs"], dtype=float),
            omega1=np.asarray(data["omega1"], dtype=float),
            omega2=np.asarray(data["omega2"], dtype=float),
            b1=float(data["b1"]), b2=float(data["b2"]),
            eps1=float(data["eps1"]), eps2=float(data["eps2"]),
            c1=float(data["c1"]), c2=float(data["c2"]),
            kernel=KernelDescriptor(**data["kernel"]),
        )


def lag_matrix(x, window: int):
    """
    Lag windows and next-value targets of a series.

    Returns
    -------
    (numpy.ndarray of shape (n - window, window), numpy.ndarray of shape (n - window,))

    Examples
    --------
    >>> X, Y = lag_matrix([1, 2, 3, 4], 2)
    >>> X.tolist(), Y.tolist()
    ([[1.0, 2.0], [2.0, 3.0]], [3.0, 4.0])
    """
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise ConfigError(f"Fenêtre invalide : {window}")
    if len(x) <= window:
        raise DataError(f"Série trop courte ({len(x)}) pour une fenêtre de {window}.")
    return sliding_window_view(x[:-1], window), x[window:]


def lstsvr_fit(X, Y, kernel: KernelDescriptor = None, eps1: float = 0.1, eps2: float = 0.1,
               c1: float = 1.0, c2: float = 1.0) -> LsTsvrModel:
    r"""
    Closed-form LS-TSVR fit.

    Parameters
    ----------
    X : array-like of shape (n, w)
        Lag windows.
    Y : array-like of shape (n,)
        Targets, ``n >= 2``.
    kernel : KernelDescriptor, default=linear
    eps1, eps2 : float, default=0.1
        Non-negative tube parameters.
    c1, c2 : float, default=1.0
        Positive penalties, kept for reference.

    Returns
    -------
    LsTsvrModel

    Raises
    ------
    DataError
        On an empty/short training set, mismatched shapes or non-finite values.

    Examples
    --------
    >>> x = np.arange(10.0)[:, None]
    >>> model = lstsvr_fit(x, 2 * x[:, 0] + 1, eps1=0.0, eps2=0.0)
    >>> round(lstsvr_predict(model, [10.0]), 6)
    21.0
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    kernel = kernel or KernelDescriptor()
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"X a {X.shape[0]} lignes mais Y {Y.shape[0]} valeurs.")
    if len(Y) < 2:
        raise DataError("LS-TSVR : au moins 2 lignes d'entraînement requises.")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise DataError("LS-TSVR : valeurs non finies dans les données d'entraînement.")
    if eps1 < 0 or eps2 < 0:
        raise ConfigError(f"eps1 et eps2 doivent être positifs (reçu {eps1}, {eps2}).")
    if not (c1 > 0 and c2 > 0):
        raise ConfigError(f"c1 et c2 doivent être > 0 (reçu {c1}, {c2}).")
    G = np.column_stack([kernel_matrix(X, X, kernel), np.ones(len(Y))])
    G_pinv = moore_penrose_pinv(G)
    u1 = G_pinv @ (Y - eps1)
    u2 = G_pinv @ (Y + eps2)
    return LsTsvrModel(
        support_inputs=X.copy(),
        omega1=u1[:-1], omega2=u2[:-1],
        b1=float(u1[-1]), b2=float(u2[-1]),
        eps1=float(eps1), eps2=float(eps2), c1=float(c1), c2=float(c2),
        kernel=kernel,
    )


def lstsvr_predict(model: LsTsvrModel, x) -> float:
    """
    Averaged regressor ``K(x, X)(omega1 + omega2)/2 + (b1 + b2)/2``.

    Raises
    ------
    DataError
        If ``x`` does not have the model's window length.

    Examples
    --------
    >>> m = LsTsvrModel(np.zeros((2, 3)), np.zeros(2), np.zeros(2), 4.0, 4.0,
    ...                 0.0, 0.0, 1.0, 1.0, KernelDescriptor())
    >>> lstsvr_predict(m, [1.0, 2.0, 3.0])
    4.0
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.window:
        raise DataError(f"Fenêtre de longueur {model.window} attendue (reçu {x.shape[0]}).")
    return float(_predict_rows(model, x[None, :])[0])


def _predict_rows(model: LsTsvrModel, rows) -> np.ndarray:
    K = kernel_matrix(rows, model.support_inputs, model.kernel)
    return 0.5 * (K @ (model.omega1 + model.omega2)) + 0.5 * (model.b1 + model.b2)


class LsTsvrForecaster(BaseForecaster):
    r"""
    LS-TSVR learner of the ensemble.

    Fitted on the last ``train_size`` lag windows of the training span and
    refitted on a sliding window every ``refit_every`` observed points; in
    between, predictions come from the cached model.

    Parameters
    ----------
    window : int, default=60
        Lag-window length (one hour at one-minute sampling).
    train_size : int, default=1440
        Maximum number of training rows.
    kernel : {"linear", "rbf"}, default="linear"
    gamma : float, optional
        RBF width; defaults to ``1 / (window * var(X))`` at each fit.
    eps1, eps2 : float, default=0.1
    c1, c2 : float, default=1.0
    refit_every : int, default=1440
    """
    name = "lstsvr"

    def __init__(self, window: int = 60, train_size: int = 1440, kernel: str = "linear",
                 gamma: float = None, eps1: float = 0.1, eps2: float = 0.1,
                 c1: float = 1.0, c2: float = 1.0, refit_every: int = 1440):
        super().__init__()
        if window < 1 or train_size < 2:
            raise ConfigError(f"window={window} et train_size={train_size} invalides.")
        if refit_every < 1:
            raise ConfigError(f"refit_every doit être >= 1 (reçu {refit_every}).")
        if kernel not in ("linear", "rbf"):
            raise ConfigError(f"Noyau inconnu : {kernel}")
        self.window = int(window)
        self.train_size = int(train_size)
        self.kernel = kernel
        self.gamma = gamma
        self.eps1, self.eps2 = float(eps1), float(eps2)
        self.c1, self.c2 = float(c1), float(c2)
        self.refit_every = int(refit_every)
        self._since_refit = 0

    @property
    def min_train_size(self) -> int:
        return self.window + 2

    @property
    def history_size(self) -> int:
        return self.train_size + self.window

    def _descriptor(self, X) -> KernelDescriptor:
        if self.kernel == "linear":
            return KernelDescriptor("linear")
        return KernelDescriptor("rbf", self.gamma or default_gamma(X))

    def fit(self, train):
        values = np.asarray(train, dtype=float)[-self.history_size:]
        X, Y = lag_matrix(values, self.window)
        self.model = lstsvr_fit(X, Y, self._descriptor(X), self.eps1, self.eps2, self.c1, self.c2)
        self._since_refit = 0
        return self

    def predict_next(self, history) -> float:
        self._check_fitted()
        if len(history) < self.window:
            raise DataError(f"Historique trop court pour LS-TSVR : {self.window} points requis.")
        return lstsvr_predict(self.model, np.asarray(history[len(history) - self.window:]))

    def observe(self, history):
        self._check_fitted()
        self._since_refit += 1
        if self._since_refit >= self.refit_every and len(history) >= self.min_train_size:
            self.fit(history)
            logger.debug("LS-TSVR : réentraînement sur %d lignes", len(self.model.omega1))

    def fitted_values(self, train) -> np.ndarray:
        self._check_fitted()
        y = np.asarray(train, dtype=float)
        out = np.full(len(y), np.nan)
        if len(y) > self.window:
            out[self.window:] = _predict_rows(self.model, lag_matrix(y, self.window)[0])
        return out

    def get_state(self):
        self._check_fitted()
        return {"model": self.model.to_dict(), "since_refit": self._since_refit}

    def set_state(self, state):
        self.model = LsTsvrModel.from_dict(state["model"])
        self._since_refit = int(state["since_refit"])
        return self
