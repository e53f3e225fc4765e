"""Recurrent cells and weight initialisers shared by the encoders and decoder."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def lstm_params(rng, prefix: str, input_dim: int, hidden: int) -> dict[str, Tensor]:
    """Packed [input, forget, output, cell] weights over ``[x; h]``; forget bias starts at 1."""
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0
    return {
        f"{prefix}.W": ad.parameter(glorot(rng, input_dim + hidden, 4 * hidden), f"{prefix}.W"),
        f"{prefix}.b": ad.parameter(bias, f"{prefix}.b"),
    }


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_cell(w: Tensor, b: Tensor, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step; the gate arithmetic is a single fused op."""
    gates = ad.linear(ad.concat([x, h], axis=1), w, b)
    n = h.shape[1]
    cd = c.data
    g = gates.data
    i, f, o = _sigmoid(g[:, :n]), _sigmoid(g[:, n : 2 * n]), _sigmoid(g[:, 2 * n : 3 * n])
    cand = np.tanh(g[:, 3 * n :])
    c_new = f * cd + i * cand
    tc = np.tanh(c_new)

    def grad(out):
        gh, gc = out[:, :n], out[:, n:]
        dc = gc + gh * o * (1.0 - tc * tc)
        dgates = np.concatenate(
            [
                dc * cand * i * (1.0 - i),
                dc * cd * f * (1.0 - f),
                gh * tc * o * (1.0 - o),
                dc * i * (1.0 - cand * cand),
            ],
            axis=1,
        )
        return dgates, dc * f

    both = ad.custom(np.concatenate([o * tc, c_new], axis=1), (gates, c), grad)
    return ad.cols(both, 0, n), ad.cols(both, n, 2 * n)


def gru_params(rng, prefix: str, input_dim: int, hidden: int) -> dict[str, Tensor]:
    """GRU bank: ``W`` over the input (packed r|z|u), ``U_rz``/``U_u`` over the state."""
    return {
        f"{prefix}.W": ad.parameter(glorot(rng, input_dim, 3 * hidden), f"{prefix}.W"),
        f"{prefix}.b": ad.parameter(np.zeros(3 * hidden), f"{prefix}.b"),
        f"{prefix}.U_rz": ad.parameter(glorot(rng, hidden, 2 * hidden), f"{prefix}.U_rz"),
        f"{prefix}.U_u": ad.parameter(glorot(rng, hidden, hidden), f"{prefix}.U_u"),
    }


def gru_cell(params: dict[str, Tensor], prefix: str, xi: Tensor, h: Tensor, extra: Tensor | None = None) -> Tensor:
    """One gated update of ``h`` from input ``xi``.

    ``extra`` is an optional pre-multiplied input term (n, 3*hidden) added to
    ``W xi``; it lets an input block be switched off without changing the
    arithmetic of the remaining blocks.
    """
    a = ad.linear(xi, params[f"{prefix}.W"], params[f"{prefix}.b"])
    if extra is not None:
        a = a + extra
    u_rz, u_u = params[f"{prefix}.U_rz"], params[f"{prefix}.U_u"]
    n = h.shape[1]
    av, hd, urz, uu = a.data, h.data, u_rz.data, u_u.data
    hu = hd @ urz
    r = _sigmoid(av[:, :n] + hu[:, :n])
    z = _sigmoid(av[:, n : 2 * n] + hu[:, n:])
    rh = r * hd
    u = np.tanh(av[:, 2 * n :] + rh @ uu)
    h_new = (1.0 - z) * u + z * hd

    def grad(g):
        du = g * (1.0 - z) * (1.0 - u * u)
        drh = du @ uu.T
        drz = np.concatenate([drh * hd * r * (1.0 - r), g * (hd - u) * z * (1.0 - z)], axis=1)
        dh = g * z + drh * r + drz @ urz.T
        return np.concatenate([drz, du], axis=1), dh, hd.T @ drz, rh.T @ du

    return ad.custom(h_new, (a, h, u_rz, u_u), grad)
