"""Two-unitary complex Hadamard matrices of order 36: constructions,
certification tools and a Sinkhorn-type search."""

__version__ = "0.1.0"
