"""Vertex models on the periodic honeycomb lattice via holographic reduction to Fisher-graph dimers."""

__version__ = "0.1.0"


class DomainError(ValueError):
    """Raised when inputs are well-formed but mathematically outside an operation's domain."""
