from .network import LinkSpec, SimNetwork

__all__ = ["LinkSpec", "SimNetwork"]
