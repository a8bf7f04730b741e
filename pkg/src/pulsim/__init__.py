"""Packet-level leaf-spine fabric simulator with gradient-based incast
marking at switches and a brake/restore congestion controller on top of
the standard ECN-fraction baseline."""

__version__ = "0.1.0"
