"""Developmental skill-curriculum reinforcement learning on a planar articulated agent."""

__version__ = "0.1.0"
