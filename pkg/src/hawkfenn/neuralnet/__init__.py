from .fenn import FennParameters, FennState, fenn_backward, fenn_sequence_forward, fenn_step
from .losses import class_weights, weighted_cross_entropy
from .network import LayerSpec, Network, NetworkSpec
from .optim import AdamState, adam_step, he_initialize

__all__ = [
    "AdamState", "FennParameters", "FennState", "LayerSpec", "Network", "NetworkSpec",
    "adam_step", "class_weights", "fenn_backward", "fenn_sequence_forward", "fenn_step",
    "he_initialize", "weighted_cross_entropy",
]
