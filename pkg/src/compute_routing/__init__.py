"""Joint routing and compute placement for in-network processing."""

from .netmodel import (
    DelayModel,
    Demand,
    DynamicDemand,
    Link,
    Network,
    NetworkError,
    Node,
    mm1_delay,
    pwl_delay,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "DelayModel",
    "Demand",
    "DynamicDemand",
    "Link",
    "Network",
    "NetworkError",
    "Node",
    "mm1_delay",
    "pwl_delay",
    "validate_network",
]
