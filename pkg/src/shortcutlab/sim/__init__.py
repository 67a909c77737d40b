"""Synchronous CONGEST simulator and the distributed algorithms built on it."""

from .core import NodeContext, NodeProgram, Network, Send, SimConfig, Trace, run

__all__ = ["NodeContext", "NodeProgram", "Network", "Send", "SimConfig", "Trace", "run"]
