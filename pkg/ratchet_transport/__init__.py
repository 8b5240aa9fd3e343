"""Ratchet Transport - diffusion-induced transport in periodic channels and its inverse problem."""

__version__ = "0.1.0"
