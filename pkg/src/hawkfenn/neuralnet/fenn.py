"""Fully Elman recurrent cell and its exact backpropagation through time.

One step, with ``u`` the input consumed at this step and ``x_prev``/``y_prev``
the previous hidden and output activations::

    x_c  = w4 @ x_c  + w5 @ x_prev        hidden context
    y_c1 = w6 @ y_c1 + w7 @ y_prev        output context feeding the hidden layer
    y_c2 = w8 @ y_c2 + w9 @ y_prev        output context feeding the output layer
    x    = tanh(x_c + w1 @ u + y_c1 + b1)
    y    = softmax(w2 @ x + w3 @ u + y_c2 + b2)

All context and previous-activation vectors start at zero.  The classic
Elman network is the special case ``w3 = w6 = w7 = w8 = w9 = 0``; dropping
``w4`` and ``w5`` as well leaves a one-hidden-layer perceptron applied to
each step independently.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import ContractViolation, NonFiniteError
from .layers import softmax
from .optim import he_initialize

WEIGHTS = ("w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9")
PARAM_NAMES = WEIGHTS + ("b1", "b2")

# parameters held at zero for the ablation heads
FROZEN = {
    "fenn": (),
    "enn": ("w3", "w6", "w7", "w8", "w9"),
    "mlp": ("w3", "w4", "w5", "w6", "w7", "w8", "w9"),
}

# Self-recurrent context matrices are rescaled to this spectral norm, so each
# context is a contraction at the start.  A plain elementwise scale is not
# enough for the 2x2 output context, whose He draw can easily exceed norm 1.
CONTEXT_SELF_SCALE = 0.5


@dataclass
class FennParameters:
    w1: np.ndarray  # h x m
    w2: np.ndarray  # K x h
    w3: np.ndarray  # K x m
    w4: np.ndarray  # h x h
    w5: np.ndarray  # h x h
    w6: np.ndarray  # h x h
    w7: np.ndarray  # h x K
    w8: np.ndarray  # K x K
    w9: np.ndarray  # K x K
    b1: np.ndarray  # h
    b2: np.ndarray  # K

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def inputs(self) -> int:
        return self.w1.shape[1]

    @property
    def classes(self) -> int:
        return self.w2.shape[0]

    def __post_init__(self):
        h, m, K = self.hidden, self.inputs, self.classes
        expected = {"w1": (h, m), "w2": (K, h), "w3": (K, m), "w4": (h, h), "w5": (h, h),
                    "w6": (h, h), "w7": (h, K), "w8": (K, K), "w9": (K, K), "b1": (h,), "b2": (K,)}
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ContractViolation(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    @classmethod
    def zeros(cls, hidden: int, inputs: int, classes: int = 2) -> "FennParameters":
        h, m, K = hidden, inputs, classes
        return cls(np.zeros((h, m)), np.zeros((K, h)), np.zeros((K, m)), np.zeros((h, h)),
                   np.zeros((h, h)), np.zeros((h, h)), np.zeros((h, K)), np.zeros((K, K)),
                   np.zeros((K, K)), np.zeros(h), np.zeros(K))

    @classmethod
    def initialize(cls, hidden: int, inputs: int, classes: int, rng, head: str = "fenn") -> "FennParameters":
        """He-normal weights, zero biases; frozen weights of ``head`` stay zero.

        Self-recurrent context matrices are rescaled to spectral norm
        ``CONTEXT_SELF_SCALE``.
        """
        p = cls.zeros(hidden, inputs, classes)
        fan_in = {"w1": inputs, "w2": hidden, "w3": inputs, "w4": hidden, "w5": hidden,
                  "w6": hidden, "w7": classes, "w8": classes, "w9": classes}
        for name in WEIGHTS:
            w = he_initialize(getattr(p, name).shape, fan_in[name], rng)
            if name in ("w4", "w6", "w8"):
                w *= CONTEXT_SELF_SCALE / np.linalg.norm(w, 2)
            if name not in FROZEN[head]:
                setattr(p, name, w)
        return p

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "FennParameters":
        return FennParameters(**{k: v.copy() for k, v in self.as_dict().items()})


@dataclass
class FennState:
    x_c: np.ndarray
    y_c1: np.ndarray
    y_c2: np.ndarray
    x_prev: np.ndarray
    y_prev: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, classes: int, batch: tuple = ()) -> "FennState":
        h, K = batch + (hidden,), batch + (classes,)
        return cls(np.zeros(h), np.zeros(h), np.zeros(K), np.zeros(h), np.zeros(K))


def _check(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"FENN: non-finite values in {name}")


def fenn_step(params: FennParameters, state: FennState, u):
    """Advance one step; works on single vectors or on a leading batch axis."""
    p = params
    u = np.asarray(u, dtype=float)
    x_c = state.x_c @ p.w4.T + state.x_prev @ p.w5.T
    y_c1 = state.y_c1 @ p.w6.T + state.y_prev @ p.w7.T
    y_c2 = state.y_c2 @ p.w8.T + state.y_prev @ p.w9.T
    x = np.tanh(x_c + u @ p.w1.T + y_c1 + p.b1)
    y = softmax(x @ p.w2.T + u @ p.w3.T + y_c2 + p.b2)
    _check("hidden activation", x)
    _check("output", y)
    return y, FennState(x_c, y_c1, y_c2, x, y)


def fenn_sequence_forward(params: FennParameters, inputs):
    """Fold the cell over ``inputs`` (``T x m`` or ``B x T x m``) from zero state.

    Returns the final output and the stacked per-step outputs.
    """
    out, cache = fenn_forward_batch(params, inputs)
    steps = np.swapaxes(cache["y"][1:], 0, 1)  # B x T x K
    return out, (steps[0] if cache["single"] else steps)


def fenn_forward_batch(params: FennParameters, inputs):
    """Forward pass keeping everything BPTT needs.

    ``inputs`` is ``(T, m)`` or ``(B, T, m)``; the returned output is the
    final-step distribution, ``(K,)`` or ``(B, K)``.
    """
    U = np.asarray(inputs, dtype=float)
    single = U.ndim == 2
    if single:
        U = U[None]
    B, T, m = U.shape
    if T < 1:
        raise ContractViolation("sequence must have at least one step")
    if m != params.inputs:
        raise ContractViolation(f"input width {m} does not match w1 ({params.inputs})")
    h, K = params.hidden, params.classes
    # index 0 holds the zero initial state; step t lives at index t + 1
    xs, ys = np.zeros((T + 1, B, h)), np.zeros((T + 1, B, K))
    xcs, yc1s, yc2s = np.zeros((T + 1, B, h)), np.zeros((T + 1, B, h)), np.zeros((T + 1, B, K))
    state = FennState.zeros(h, K, (B,))
    for t in range(T):
        _, state = fenn_step(params, state, U[:, t])
        xs[t + 1], ys[t + 1] = state.x_prev, state.y_prev
        xcs[t + 1], yc1s[t + 1], yc2s[t + 1] = state.x_c, state.y_c1, state.y_c2
    cache = {"U": U, "x": xs, "y": ys, "xc": xcs, "yc1": yc1s, "yc2": yc2s, "single": single}
    y = ys[T]
    return (y[0] if single else y), cache


def fenn_backward_batch(params: FennParameters, cache, dy_final):
    """Exact BPTT given the loss gradient w.r.t. the final-step output.

    Returns ``(grads, dU)`` where ``grads`` maps parameter names to arrays
    shaped like the parameters and ``dU`` is shaped like the inputs.
    """
    p = params
    U, xs, ys = cache["U"], cache["x"], cache["y"]
    xcs, yc1s, yc2s = cache["xc"], cache["yc1"], cache["yc2"]
    B, T, _ = U.shape
    dy_final = np.asarray(dy_final, dtype=float).reshape(B, -1)
    g = {k: np.zeros_like(v) for k, v in p.as_dict().items()}
    dU = np.zeros_like(U)
    # gradients flowing back from step t + 1 into the step-t quantities
    gxc_next = np.zeros((B, p.hidden))
    gyc1_next = np.zeros((B, p.hidden))
    gyc2_next = np.zeros((B, p.classes))
    for t in range(T, 0, -1):
        u = U[:, t - 1]
        x, y = xs[t], ys[t]
        gy = gyc1_next @ p.w7 + gyc2_next @ p.w9
        if t == T:
            gy = gy + dy_final
        gz = y * (gy - np.sum(gy * y, axis=1, keepdims=True))
        g["w2"] += gz.T @ x
        g["w3"] += gz.T @ u
        g["b2"] += gz.sum(axis=0)
        gyc2 = gz + gyc2_next @ p.w8
        gx = gz @ p.w2 + gxc_next @ p.w5
        ga = gx * (1.0 - x * x)
        g["w1"] += ga.T @ u
        g["b1"] += ga.sum(axis=0)
        dU[:, t - 1] = ga @ p.w1 + gz @ p.w3
        gxc = ga + gxc_next @ p.w4
        gyc1 = ga + gyc1_next @ p.w6
        g["w4"] += gxc.T @ xcs[t - 1]
        g["w5"] += gxc.T @ xs[t - 1]
        g["w6"] += gyc1.T @ yc1s[t - 1]
        g["w7"] += gyc1.T @ ys[t - 1]
        g["w8"] += gyc2.T @ yc2s[t - 1]
        g["w9"] += gyc2.T @ ys[t - 1]
        gxc_next, gyc1_next, gyc2_next = gxc, gyc1, gyc2
    return g, (dU[0] if cache["single"] else dU)


def fenn_backward(params: FennParameters, inputs, target, class_weights):
    """Loss and parameter gradients for one sequence under weighted cross-entropy.

    The loss is taken on the final-step output only.
    """
    from .losses import weighted_cross_entropy, weighted_cross_entropy_grad

    y, cache = fenn_forward_batch(params, inputs)
    loss = weighted_cross_entropy(y, target, class_weights)
    grads, _ = fenn_backward_batch(params, cache, weighted_cross_entropy_grad(y, target, class_weights))
    return loss, grads
