"""Single-hidden-layer feed-forward networks trained as extreme learning machines.

The hidden layer (input weights and biases) is drawn at random once and left
alone; only the output weights ``beta`` are learned. Three solvers are
provided:

* :func:`fit_batch_elm` -- minimum-norm least squares, ``beta = H^+ T``.
* :func:`fit_regularized` -- ridge form, ``beta = (I/gamma_bar + H^T H)^+ H^T T``.
* :func:`lsielm_init` / :func:`lsielm_update` -- the least-squares incremental
  ELM, which reaches the same ridge solution chunk by chunk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .linalg import InvalidInputError, NumericalError, ShapeError, as_matrix, pinv


class StateError(RuntimeError):
    """An incremental solver was used out of order."""


class InvalidParameterError(ValueError):
    pass


def sigmoid(z):
    """Logistic function ``1 / (1 + exp(-z))``."""
    return expit(z)


ACTIVATIONS = {"sigmoid": sigmoid}


@dataclass
class SLFN:
    """Network with fixed random hidden layer and learned output weights.

    ``input_weights`` has one row per hidden node (shape ``n_hidden x n_in``),
    ``biases`` has length ``n_hidden`` and ``beta`` is ``n_hidden x n_out``.
    The hidden-layer arrays are made read-only on construction.
    """

    input_weights: np.ndarray
    biases: np.ndarray
    beta: np.ndarray
    activation: str = "sigmoid"

    def __post_init__(self):
        self.input_weights = as_matrix(self.input_weights, "input_weights").copy()
        self.biases = np.array(self.biases, dtype=float).reshape(-1)
        self.beta = as_matrix(self.beta, "beta").copy()
        if self.activation not in ACTIVATIONS:
            raise InvalidParameterError(f"unknown activation {self.activation!r}")
        if self.biases.shape[0] != self.n_hidden:
            raise ShapeError("one bias per hidden node required")
        if self.beta.shape[0] != self.n_hidden:
            raise ShapeError(f"beta must have {self.n_hidden} rows, got {self.beta.shape[0]}")
        if not np.isfinite(self.biases).all():
            raise InvalidInputError("biases contain non-finite entries")
        self.input_weights.flags.writeable = False
        self.biases.flags.writeable = False

    @classmethod
    def random(cls, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator,
               scale: float = 1.0) -> "SLFN":
        """Hidden layer uniform on ``[-scale, scale]``, zero output weights."""
        w = rng.uniform(-scale, scale, size=(n_hidden, n_in))
        b = rng.uniform(-scale, scale, size=n_hidden)
        return cls(w, b, np.zeros((n_hidden, n_out)))

    @property
    def n_in(self) -> int:
        return self.input_weights.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.beta.shape[1]

    def hidden(self, x: np.ndarray) -> np.ndarray:
        """Unchecked hidden activations for a batch ``x`` (rows are samples)."""
        return ACTIVATIONS[self.activation](x @ self.input_weights.T + self.biases)

    def set_beta(self, beta: np.ndarray) -> None:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != self.beta.shape:
            raise ShapeError(f"beta must have shape {self.beta.shape}, got {beta.shape}")
        self.beta = beta.copy()


def hidden_matrix(net: SLFN, inputs) -> np.ndarray:
    """``H[j, i] = g(w_i . x_j + b_i)`` for every sample row ``x_j``."""
    x = as_matrix(inputs, "inputs")
    if x.shape[1] != net.n_in:
        raise ShapeError(f"inputs have {x.shape[1]} columns, network expects {net.n_in}")
    return net.hidden(x)


def forward(net: SLFN, x) -> np.ndarray:
    """Network output for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n_in,):
        raise ShapeError(f"expected input of length {net.n_in}, got shape {x.shape}")
    return (hidden_matrix(net, x) @ net.beta)[0]


def _check_xt(net: SLFN, X, T) -> tuple[np.ndarray, np.ndarray]:
    H = hidden_matrix(net, X)
    T = as_matrix(T, "T")
    if T.shape[0] != H.shape[0]:
        raise ShapeError(f"X has {H.shape[0]} rows but T has {T.shape[0]}")
    if T.shape[1] != net.n_out:
        raise ShapeError(f"T has {T.shape[1]} columns, network has {net.n_out} outputs")
    return H, T


def fit_batch_elm(net: SLFN, X, T) -> None:
    H, T = _check_xt(net, X, T)
    net.set_beta(pinv(H) @ T)


def _regularized_system(H: np.ndarray, gamma_bar: float) -> np.ndarray:
    if not gamma_bar > 0:
        raise InvalidParameterError(f"gamma_bar must be positive, got {gamma_bar}")
    return np.eye(H.shape[1]) / gamma_bar + H.T @ H


def fit_regularized(net: SLFN, X, T, gamma_bar: float) -> None:
    H, T = _check_xt(net, X, T)
    A = _regularized_system(H, gamma_bar)
    net.set_beta(pinv(A) @ (H.T @ T))


@dataclass
class LsielmState:
    """Incremental ridge solver state.

    Only the pseudoinverse ``a_dagger`` of ``A = I/gamma_bar + sum H^T H`` is
    kept; ``A`` itself is never needed after initialisation.
    """

    net: SLFN
    gamma_bar: float
    a_dagger: np.ndarray = field(default=None)
    initialized: bool = False

    def __post_init__(self):
        if not self.gamma_bar > 0:
            raise InvalidParameterError(f"gamma_bar must be positive, got {self.gamma_bar}")
        if self.a_dagger is None:
            self.a_dagger = np.eye(self.net.n_hidden) * self.gamma_bar


def lsielm_init(state: LsielmState, X, T) -> None:
    if state.initialized:
        raise StateError("LS-IELM state is already initialised")
    H, T = _check_xt(state.net, X, T)
    _init_from_hidden(state, H, T)


def _init_from_hidden(state: LsielmState, H: np.ndarray, T: np.ndarray) -> None:
    a_dagger = pinv(_regularized_system(H, state.gamma_bar))
    beta = a_dagger @ (H.T @ T)
    if not np.isfinite(beta).all():
        raise NumericalError("initial beta is not finite")
    state.net.set_beta(beta)
    state.a_dagger = a_dagger
    state.initialized = True


def lsielm_update(state: LsielmState, X_chunk, T_chunk) -> None:
    """Fold a chunk of ``k`` new samples into ``beta`` and ``a_dagger``.

    ``K = I - A^+ Hc^T (Hc A^+ Hc^T + I_k)^+ Hc``, then ``beta <- K beta +
    K A^+ Hc^T Tc`` and ``A^+ <- K A^+``. Nothing is written unless every
    intermediate is finite.
    """
    if not state.initialized:
        raise StateError("LS-IELM update before initialisation")
    H, T = _check_xt(state.net, X_chunk, T_chunk)
    if H.shape[0] < 1:
        raise ShapeError("chunk must contain at least one sample")
    _update_from_hidden(state, H, T)


def _update_from_hidden(state: LsielmState, H: np.ndarray, T: np.ndarray) -> None:
    P = state.a_dagger
    PHt = P @ H.T
    inner = pinv(H @ PHt + np.eye(H.shape[0]))
    # Non-finite results are detected below; no need for numpy to warn as well.
    with np.errstate(invalid="ignore", over="ignore"):
        K = np.eye(P.shape[0]) - PHt @ inner @ H
        beta = K @ state.net.beta + K @ (PHt @ T)
        a_dagger = K @ P
    if not (np.isfinite(beta).all() and np.isfinite(a_dagger).all()):
        raise NumericalError("LS-IELM update produced non-finite values")
    state.net.beta = beta
    state.a_dagger = a_dagger


# -- checkpoint format -------------------------------------------------------

def slfn_to_dict(net: SLFN, gamma_bar: float | None = None) -> dict:
    d = {
        "dims": {"n_in": net.n_in, "n_hidden": net.n_hidden, "n_out": net.n_out},
        "activation": net.activation,
        "input_weights": net.input_weights.ravel().tolist(),
        "biases": net.biases.tolist(),
        "output_weights": net.beta.ravel().tolist(),
    }
    if gamma_bar is not None:
        d["gamma_bar"] = gamma_bar
    return d


def slfn_from_dict(d: dict) -> SLFN:
    dims = d["dims"]
    n_in, n_hidden, n_out = dims["n_in"], dims["n_hidden"], dims["n_out"]
    return SLFN(
        np.array(d["input_weights"], dtype=float).reshape(n_hidden, n_in),
        np.array(d["biases"], dtype=float),
        np.array(d["output_weights"], dtype=float).reshape(n_hidden, n_out),
        activation=d.get("activation", "sigmoid"),
    )


def dumps_slfn(net: SLFN, gamma_bar: float | None = None) -> str:
    """Serialise to JSON. Python's float repr makes the round trip exact."""
    return json.dumps(slfn_to_dict(net, gamma_bar), indent=1)


def loads_slfn(text: str) -> tuple[SLFN, float | None]:
    d = json.loads(text)
    return slfn_from_dict(d), d.get("gamma_bar")
