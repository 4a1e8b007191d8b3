"""Bell-state algebra, entanglement swapping, correlation polytopes, frame recovery
and radar synchronization with correlation boxes."""

__version__ = "0.1.0"
