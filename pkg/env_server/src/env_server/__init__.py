"""Reference environmental-model service.

Speaks the line-delimited JSON scoring protocol over stdio or TCP so
external detectors can serve scores to the embedding engine without
linking against it.
"""

from .server import ConstantBackend, LinearBackend, ServerConfig, handle_line

__all__ = ["ConstantBackend", "LinearBackend", "ServerConfig", "handle_line"]
