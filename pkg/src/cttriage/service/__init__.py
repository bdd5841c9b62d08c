"""HTTP service: authenticated REST API over the inference pipeline."""

from .app import create_app
from .config import ServiceConfig

__all__ = ["create_app", "ServiceConfig"]
