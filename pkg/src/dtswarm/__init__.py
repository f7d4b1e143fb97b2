"""Digital-twin coordinated swarm target localization simulator."""

__version__ = "0.1.0"
