"""graphforge: controlled graph generation with attribute-conditioned latents."""

__version__ = "0.1.0"
