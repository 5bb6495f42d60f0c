"""Harris hawks optimization with quasi-oppositional learning, fully Elman
recurrent networks, and a small signal-classification pipeline."""

__version__ = "0.1.0"
