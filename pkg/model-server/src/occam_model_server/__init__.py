"""Model server speaking the occam counting pipeline's wire protocol."""

__version__ = "0.1.0"

from .config import AdapterConfig
from .backends import build_backend

__all__ = ["AdapterConfig", "build_backend"]
