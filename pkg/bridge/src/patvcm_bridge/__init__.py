"""Wire-protocol adapter exposing task models to patvcm pipelines."""

from patvcm_bridge.client import BridgeError, BridgeTaskModels
from patvcm_bridge.server import BridgeServer, start_background

__all__ = ["BridgeError", "BridgeTaskModels", "BridgeServer", "start_background"]
