"""Adaptive graph reasoning network for face parsing on procedural synthetic data."""

from .config import Config, load_config

__all__ = ["Config", "load_config"]
__version__ = "0.1.0"
