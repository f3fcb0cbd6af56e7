"""Desk-scale predictor with hand-written reverse-mode gradients.

Architecture (all dense, tanh nonlinearities):

    x (feature_dim) -> hidden 64 -> latent z 32
    z -> projection p (8)          # used by the causal regularizers
    z -> residual r (future x 2)   # added to the constant-velocity anchor

With all-zero parameters the residual is zero, so the prediction is the
constant-velocity extrapolation exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .features import Standardizer, feature_dim

MODEL_FORMAT_VERSION = 1
HIDDEN_DIM = 64
LATENT_DIM = 32
PROJECTION_DIM = 8

_PARAM_NAMES = ("W1", "b1", "W2", "b2", "Wh", "bh", "Wg", "bg")


@dataclass
class Forward:
    """Cached intermediate activations for one batch."""

    x: np.ndarray   # (B, feature_dim) standardized input
    h1: np.ndarray  # (B, hidden)
    z: np.ndarray   # (B, latent)
    p: np.ndarray   # (B, projection)
    r: np.ndarray   # (B, future*2) residual


@dataclass
class ToyModel:
    history_steps: int
    future_steps: int
    params: dict[str, np.ndarray]
    standardizer: Standardizer

    @classmethod
    def init(cls, history_steps: int, future_steps: int,
             rng: np.random.Generator,
             standardizer: Standardizer | None = None,
             scale: float = 0.1) -> "ToyModel":
        d = feature_dim(history_steps)
        out = 2 * future_steps
        params = {
            "W1": rng.normal(0.0, scale, (HIDDEN_DIM, d)) / np.sqrt(d),
            "b1": np.zeros(HIDDEN_DIM),
            "W2": rng.normal(0.0, scale, (LATENT_DIM, HIDDEN_DIM))
            / np.sqrt(HIDDEN_DIM),
            "b2": np.zeros(LATENT_DIM),
            "Wh": rng.normal(0.0, scale, (PROJECTION_DIM, LATENT_DIM))
            / np.sqrt(LATENT_DIM),
            "bh": np.zeros(PROJECTION_DIM),
            "Wg": np.zeros((out, LATENT_DIM)),
            "bg": np.zeros(out),
        }
        if standardizer is None:
            standardizer = Standardizer.identity(d)
        return cls(history_steps, future_steps, params, standardizer)

    @classmethod
    def zeros(cls, history_steps: int, future_steps: int) -> "ToyModel":
        d = feature_dim(history_steps)
        out = 2 * future_steps
        params = {
            "W1": np.zeros((HIDDEN_DIM, d)), "b1": np.zeros(HIDDEN_DIM),
            "W2": np.zeros((LATENT_DIM, HIDDEN_DIM)),
            "b2": np.zeros(LATENT_DIM),
            "Wh": np.zeros((PROJECTION_DIM, LATENT_DIM)),
            "bh": np.zeros(PROJECTION_DIM),
            "Wg": np.zeros((out, LATENT_DIM)), "bg": np.zeros(out),
        }
        return cls(history_steps, future_steps, params,
                   Standardizer.identity(d))

    def copy(self) -> "ToyModel":
        return ToyModel(
            self.history_steps, self.future_steps,
            {k: v.copy() for k, v in self.params.items()},
            Standardizer(self.standardizer.mean.copy(),
                         self.standardizer.std.copy()))

    # ---- forward / backward -------------------------------------------

    def forward(self, X: np.ndarray) -> Forward:
        """X: (B, feature_dim) raw features; standardization applied here."""
        X = np.atleast_2d(X)
        Xn = self.standardizer.apply(X)
        P = self.params
        h1 = np.tanh(Xn @ P["W1"].T + P["b1"])
        z = np.tanh(h1 @ P["W2"].T + P["b2"])
        p = np.tanh(z @ P["Wh"].T + P["bh"])
        r = z @ P["Wg"].T + P["bg"]
        return Forward(x=Xn, h1=h1, z=z, p=p, r=r)

    def predict(self, X: np.ndarray, cv: np.ndarray) -> np.ndarray:
        """Predicted ego future(s) in the ego frame: anchor + residual."""
        fwd = self.forward(X)
        r = fwd.r.reshape(-1, self.future_steps, 2)
        out = cv.reshape(-1, self.future_steps, 2) + r
        return out if out.shape[0] > 1 else out[0]

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def backward(self, fwd: Forward, grad_r: np.ndarray | None,
                 grad_p: np.ndarray | None,
                 grads: dict[str, np.ndarray]) -> None:
        """Accumulate parameter gradients for one batch.

        grad_r: (B, future*2) upstream gradient on the residual, or None.
        grad_p: (B, projection) upstream gradient on the projection, or None.
        """
        P = self.params
        grad_z = np.zeros_like(fwd.z)
        if grad_r is not None:
            grads["Wg"] += grad_r.T @ fwd.z
            grads["bg"] += grad_r.sum(axis=0)
            grad_z += grad_r @ P["Wg"]
        if grad_p is not None:
            dp_pre = grad_p * (1.0 - fwd.p ** 2)
            grads["Wh"] += dp_pre.T @ fwd.z
            grads["bh"] += dp_pre.sum(axis=0)
            grad_z += dp_pre @ P["Wh"]
        dz_pre = grad_z * (1.0 - fwd.z ** 2)
        grads["W2"] += dz_pre.T @ fwd.h1
        grads["b2"] += dz_pre.sum(axis=0)
        grad_h1 = dz_pre @ P["W2"]
        dh1_pre = grad_h1 * (1.0 - fwd.h1 ** 2)
        grads["W1"] += dh1_pre.T @ fwd.x
        grads["b1"] += dh1_pre.sum(axis=0)

    # ---- parameter vector helpers (for finite-difference checks) ------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in _PARAM_NAMES])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for k in _PARAM_NAMES:
            size = self.params[k].size
            self.params[k] = flat[i:i + size].reshape(
                self.params[k].shape).copy()
            i += size

    @staticmethod
    def flatten_grads(grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[k].ravel() for k in _PARAM_NAMES])

    # ---- persistence ---------------------------------------------------

    def save(self, path: str | Path) -> None:
        try:
            np.savez(
                Path(path),
                format_version=np.array(MODEL_FORMAT_VERSION),
                history_steps=np.array(self.history_steps),
                future_steps=np.array(self.future_steps),
                standardizer_mean=self.standardizer.mean,
                standardizer_std=self.standardizer.std,
                **self.params,
            )
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ToyModel":
        try:
            data = np.load(Path(path))
        except (OSError, ValueError) as exc:
            raise IoFailure(str(exc)) from exc
        version = int(data["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise IoFailure(f"unsupported model format version {version}")
        params = {k: data[k] for k in _PARAM_NAMES}
        return cls(
            history_steps=int(data["history_steps"]),
            future_steps=int(data["future_steps"]),
            params=params,
            standardizer=Standardizer(
                data["standardizer_mean"], data["standardizer_std"]),
        )


def finite_difference_check(loss_fn, model: ToyModel,
                            analytic: np.ndarray,
                            coords: np.ndarray,
                            step: float = 1e-5) -> float:
    """Max relative error |analytic - central difference| / (|fd| + 1e-8)
    over the given flat-parameter coordinates."""
    flat = model.get_flat()
    worst = 0.0
    for c in coords:
        saved = flat[c]
        flat[c] = saved + step
        model.set_flat(flat)
        up = loss_fn(model)
        flat[c] = saved - step
        model.set_flat(flat)
        down = loss_fn(model)
        flat[c] = saved
        model.set_flat(flat)
        fd = (up - down) / (2.0 * step)
        rel = abs(analytic[c] - fd) / (abs(fd) + 1e-8)
        worst = max(worst, rel)
    return worst
