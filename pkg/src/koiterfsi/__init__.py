"""Galerkin solver for an incompressible fluid in a channel closed by a linear Koiter shell."""
from importlib import metadata

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # running from a source tree without installation
    __version__ = "0.1.0"

__all__ = ["__version__"]
