"""Replication vs checkpoint/restart fault-tolerance simulator."""

__version__ = "0.1.0"
