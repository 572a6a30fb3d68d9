"""Bias-swept TLS spectroscopy: simulator and extraction pipeline."""

__version__ = "0.1.0"

from .model import DeviceParams, TlsParams  # noqa: F401
