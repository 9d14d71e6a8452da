"""Two-agent dialog policy learning on a synthetic multi-domain dialog world."""

from .backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
