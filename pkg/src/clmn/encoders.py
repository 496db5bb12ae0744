"""LSTM and CNN sequence encoders over embedded token sequences.

Inputs are ``(N, T, E)`` embedded batches with an ``(N, T)`` boolean mask that is
true at real tokens.  A single ``(T, E)`` sequence with a ``(T,)`` mask is also
accepted and yields a 1-D encoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .tensor import Tensor

INIT_SCALE = 0.08


def _uniform(rng: np.random.Generator, shape, name: str) -> Tensor:
    return Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape), requires_grad=True, name=name)


@dataclass
class LstmParams:
    """Gate blocks are laid out [input, forget, cell-candidate, output] along the last axis."""

    w_ih: Tensor  # (E, 4H)
    w_hh: Tensor  # (H, 4H)
    b: Tensor     # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_ih.shape[0]

    def tensors(self) -> dict[str, Tensor]:
        return {"w_ih": self.w_ih, "w_hh": self.w_hh, "b": self.b}


@dataclass
class CnnParams:
    w: Tensor  # (width * E, F)
    b: Tensor  # (F,)
    width: int

    @property
    def filters(self) -> int:
        return self.w.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w.shape[0] // self.width

    def tensors(self) -> dict[str, Tensor]:
        return {"w": self.w, "b": self.b}


def init_lstm(rng: np.random.Generator, input_dim: int, hidden: int) -> LstmParams:
    b = rng.uniform(-INIT_SCALE, INIT_SCALE, size=4 * hidden)
    b[hidden:2 * hidden] = 1.0
    return LstmParams(
        w_ih=_uniform(rng, (input_dim, 4 * hidden), "w_ih"),
        w_hh=_uniform(rng, (hidden, 4 * hidden), "w_hh"),
        b=Tensor(b, requires_grad=True, name="b"),
    )


def init_cnn(rng: np.random.Generator, input_dim: int, filters: int, width: int = 5) -> CnnParams:
    return CnnParams(
        w=_uniform(rng, (width * input_dim, filters), "w"),
        b=_uniform(rng, (filters,), "b"),
        width=width,
    )


def _batchify(x, mask, input_dim: int, who: str):
    x = T.as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    single = x.ndim == 2
    if single:
        x = x.reshape(1, *x.shape)
        mask = mask[None]
    if x.ndim != 3:
        raise ShapeError(f"{who}: expected (N, T, E) input, got {x.shape}")
    if x.shape[2] != input_dim:
        raise ShapeError(f"{who}: embedding dim {x.shape[2]} does not match parameters ({input_dim})")
    if mask.shape != x.shape[:2]:
        raise ShapeError(f"{who}: mask shape {mask.shape} does not match input {x.shape[:2]}")
    # drop trailing all-pad columns; they cannot influence the result
    real_cols = np.flatnonzero(mask.any(axis=0))
    t_eff = int(real_cols[-1]) + 1 if real_cols.size else 0
    if t_eff < x.shape[1]:
        x = x[:, :t_eff]
        mask = mask[:, :t_eff]
    return x, mask, single


def lstm_encode(params: LstmParams, x, mask) -> Tensor:
    """Final hidden state of a single-layer LSTM; pad steps carry the state through unchanged."""
    x, mask, single = _batchify(x, mask, params.input_dim, "lstm_encode")
    n, steps = mask.shape
    hdim = params.hidden
    h = T.as_tensor(np.zeros((n, hdim)))
    if steps > 0:
        xw = x @ params.w_ih + params.b
        c = T.as_tensor(np.zeros((n, hdim)))
        for t in range(steps):
            gates = xw[:, t] + h @ params.w_hh
            i = T.sigmoid(gates[:, :hdim])
            f = T.sigmoid(gates[:, hdim:2 * hdim])
            g = T.tanh(gates[:, 2 * hdim:3 * hdim])
            o = T.sigmoid(gates[:, 3 * hdim:])
            c_new = f * c + i * g
            h_new = o * T.tanh(c_new)
            m = mask[:, t]
            if m.all():
                h, c = h_new, c_new
            else:
                keep = m[:, None].astype(np.float64)
                h = h_new * keep + h * (1.0 - keep)
                c = c_new * keep + c * (1.0 - keep)
    return h[0] if single else h


def cnn_encode(params: CnnParams, x, mask) -> Tensor:
    """Same-padded 1-D convolution, tanh, then max-pool over real positions."""
    x, mask, single = _batchify(x, mask, params.input_dim, "cnn_encode")
    n, steps = mask.shape
    if steps == 0:
        out = T.as_tensor(np.zeros((n, params.filters)))
    else:
        fmask = mask[:, :, None].astype(np.float64)
        if not mask.all():
            x = x * fmask
        windows = T.unfold1d(x, params.width)
        maps = T.tanh(windows @ params.w + params.b)
        out = T.masked_max(maps, mask[:, :, None], axis=1)
    return out[0] if single else out
