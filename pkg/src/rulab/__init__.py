"""Resource-theory lab: measures, powers and gate-implementation bounds."""

__version__ = "0.1.0"
