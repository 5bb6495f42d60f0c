"""Sequential 1-D CNN with a recurrent classification head.

The convolutional feature map ``(batch, channels, length)`` is read by the
head as a sequence over the remaining length axis, one ``channels``-wide
feature vector per step.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import ContractViolation
from . import layers as L
from .fenn import FROZEN, PARAM_NAMES, FennParameters, fenn_backward_batch, fenn_forward_batch
from .optim import he_initialize

FORMAT_VERSION = 1
LAYER_KINDS = ("conv1d", "batchnorm", "leaky_relu", "maxpool", "dropout", "head")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    channels: int = 0
    kernel: int = 0
    stride: int = 1
    slope: float = L.LEAKY_SLOPE
    width: int = 2
    p: float = 0.0
    head: str = "fenn"
    hidden: int = 20
    classes: int = 2

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ContractViolation(f"unknown layer kind {self.kind!r}")
        if self.kind == "head" and self.head not in FROZEN:
            raise ContractViolation(f"unknown head {self.head!r}; use one of {sorted(FROZEN)}")


def conv(channels, kernel, stride=1) -> LayerSpec:
    return LayerSpec("conv1d", channels=channels, kernel=kernel, stride=stride)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_channels: int = 1
    input_length: int = 300

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        heads = [i for i, l in enumerate(self.layers) if l.kind == "head"]
        if heads != [len(self.layers) - 1]:
            raise ContractViolation("a network needs exactly one head, placed last")
        self.shapes()

    @property
    def head(self) -> LayerSpec:
        return self.layers[-1]

    def shapes(self) -> list:
        """(channels, length) after each layer; raises if two layers do not fit."""
        c, n = self.input_channels, self.input_length
        out = []
        for spec in self.layers[:-1]:
            if spec.kind == "conv1d":
                n = L.conv1d_output_length(n, spec.kernel, spec.stride)
                c = spec.channels
            elif spec.kind == "maxpool":
                n = L.conv1d_output_length(n, spec.width, spec.stride)
            out.append((c, n))
        if n < 1:
            raise ContractViolation("feature map collapsed to zero length")
        return out

    def feature_shape(self) -> tuple:
        s = self.shapes()
        return s[-1] if s else (self.input_channels, self.input_length)

    def with_head(self, head: str) -> "NetworkSpec":
        return replace(self, layers=self.layers[:-1] + (replace(self.head, head=head),))

    def to_json(self) -> dict:
        return {"input_channels": self.input_channels, "input_length": self.input_length,
                "layers": [asdict(l) for l in self.layers]}

    @classmethod
    def from_json(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(LayerSpec(**l) for l in d["layers"]), d.get("input_channels", 1),
                   d.get("input_length", 300))

    @classmethod
    def default(cls, head: str = "fenn", input_length: int = 300, hidden: int = 20) -> "NetworkSpec":
        """Desk-scale stand-in for the deep clinical topology: three
        conv/BN/LeakyReLU/max-pool blocks, dropout, recurrent head."""
        block = lambda ch, k, s=1: (conv(ch, k, s), LayerSpec("batchnorm"), LayerSpec("leaky_relu"),  # noqa: E731
                                    LayerSpec("maxpool", width=2, stride=2))
        return cls(block(8, 7, 2) + block(16, 5) + block(16, 5)
                   + (LayerSpec("dropout", p=0.0), LayerSpec("head", head=head, hidden=hidden)),
                   1, input_length)


class Network:
    def __init__(self, spec: NetworkSpec, rng=None, dropout: float | None = None):
        self.spec = spec
        self.dropout = dropout
        self.params: dict = {}
        self.buffers: dict = {}
        rng = np.random.default_rng(0) if rng is None else rng
        c = spec.input_channels
        for i, s in enumerate(spec.layers[:-1]):
            if s.kind == "conv1d":
                self.params[f"{i}.W"] = he_initialize((s.channels, c, s.kernel), c * s.kernel, rng)
                self.params[f"{i}.b"] = np.zeros(s.channels)
                c = s.channels
            elif s.kind == "batchnorm":
                self.params[f"{i}.gamma"] = np.ones(c)
                self.params[f"{i}.beta"] = np.zeros(c)
                self.buffers[f"{i}.mean"] = np.zeros(c)
                self.buffers[f"{i}.var"] = np.ones(c)
        h = spec.head
        fp = FennParameters.initialize(h.hidden, c, h.classes, rng, h.head)
        for k, v in fp.as_dict().items():
            self.params[f"head.{k}"] = v
        self.frozen = tuple(f"head.{k}" for k in FROZEN[h.head])
        self._caches = None

    def head_params(self) -> FennParameters:
        return FennParameters(**{k: self.params[f"head.{k}"] for k in PARAM_NAMES})

    def forward(self, x, train: bool = False, rng=None) -> np.ndarray:
        """Class probabilities ``(B, K)`` for inputs ``(B, C, L)`` or ``(B, L)``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[:, None, :]
        caches = []
        for i, s in enumerate(self.spec.layers[:-1]):
            if s.kind == "conv1d":
                x, c = L.conv1d_forward(x, self.params[f"{i}.W"], self.params[f"{i}.b"], s.stride)
            elif s.kind == "batchnorm":
                x, c = L.batchnorm1d_forward(x, self.params[f"{i}.gamma"], self.params[f"{i}.beta"],
                                             self.buffers[f"{i}.mean"], self.buffers[f"{i}.var"],
                                             mode="train" if train else "infer")
            elif s.kind == "leaky_relu":
                x, c = L.leaky_relu_forward(x, s.slope)
            elif s.kind == "maxpool":
                x, c = L.maxpool1d_forward(x, s.width, s.stride)
            else:
                p = s.p if self.dropout is None else self.dropout
                x, c = L.dropout_forward(x, p, rng, train and rng is not None)
            caches.append(c)
        y, hc = fenn_forward_batch(self.head_params(), np.swapaxes(x, 1, 2))
        caches.append(hc)
        self._caches = caches
        return y

    def backward(self, dy) -> dict:
        """Parameter gradients for the last ``forward`` call, given dLoss/dprobs."""
        caches = self._caches
        grads = {}
        hg, dseq = fenn_backward_batch(self.head_params(), caches[-1], dy)
        for k, v in hg.items():
            grads[f"head.{k}"] = v
        dx = np.swapaxes(dseq, 1, 2)
        for i in range(len(self.spec.layers) - 2, -1, -1):
            s, c = self.spec.layers[i], caches[i]
            if s.kind == "conv1d":
                dx, grads[f"{i}.W"], grads[f"{i}.b"] = L.conv1d_backward(dx, c)
            elif s.kind == "batchnorm":
                dx, grads[f"{i}.gamma"], grads[f"{i}.beta"] = L.batchnorm1d_backward(dx, c)
            elif s.kind == "leaky_relu":
                dx = L.leaky_relu_backward(dx, c)
            elif s.kind == "maxpool":
                dx = L.maxpool1d_backward(dx, c)
            else:
                dx = L.dropout_backward(dx, c)
        for k in self.frozen:
            grads[k] = np.zeros_like(grads[k])
        return grads

    def state(self) -> dict:
        return {**{k: v.copy() for k, v in self.params.items()},
                **{f"buffer:{k}": v.copy() for k, v in self.buffers.items()}}

    def load_state(self, state: dict) -> None:
        for k, v in state.items():
            if k.startswith("buffer:"):
                self.buffers[k[7:]][...] = v
            else:
                self.params[k][...] = v

    # --- persistence ---------------------------------------------------

    def save(self, path) -> Path:
        """Write ``<path>.json`` (spec, tensor index, sha256) and ``<path>.bin``
        (little-endian float64 tensors in index order)."""
        path = Path(path)
        state = self.state()
        names = sorted(state)
        blob = b"".join(np.ascontiguousarray(state[k], dtype="<f8").tobytes() for k in names)
        index, offset = [], 0
        for k in names:
            index.append({"name": k, "shape": list(state[k].shape), "offset": offset})
            offset += state[k].size * 8
        meta = {"format_version": FORMAT_VERSION, "spec": self.spec.to_json(), "dropout": self.dropout,
                "tensors": index, "blob": path.name + ".bin", "sha256": hashlib.sha256(blob).hexdigest()}
        path.parent.mkdir(parents=True, exist_ok=True)
        Path(str(path) + ".bin").write_bytes(blob)
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return Path(str(path) + ".json")

    @classmethod
    def load(cls, path) -> "Network":
        path = Path(str(path).removesuffix(".json"))
        meta = json.loads(Path(str(path) + ".json").read_text())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ContractViolation(f"unsupported network format {meta.get('format_version')}")
        blob = (path.parent / meta["blob"]).read_bytes()
        if hashlib.sha256(blob).hexdigest() != meta["sha256"]:
            raise ContractViolation("tensor blob checksum mismatch")
        net = cls(NetworkSpec.from_json(meta["spec"]), dropout=meta.get("dropout"))
        state = {}
        for t in meta["tensors"]:
            n = int(np.prod(t["shape"]))
            state[t["name"]] = np.frombuffer(blob, "<f8", n, t["offset"]).reshape(t["shape"])
        net.load_state(state)
        return net
