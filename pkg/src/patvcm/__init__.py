"""patvcm: layered baseline + task-aware auxiliary token compression testbed."""

__version__ = "0.1.0"

from patvcm.errors import ConfigError, StructuralError

__all__ = ["ConfigError", "StructuralError", "__version__"]
