"""LTE-NR dual-connectivity handover simulator with CDQL and hierarchical DQN agents."""

__version__ = "0.1.0"
