"""gradgen: graph auto-decoder generative model with a graph-attention flow."""

__version__ = "0.1.0"
