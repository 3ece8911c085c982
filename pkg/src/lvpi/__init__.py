"""Latent-variable regression with LV-localized prediction intervals."""

__version__ = "0.1.0"
