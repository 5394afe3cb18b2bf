"""Simulator and learning controllers for MEC-rendered wireless VR."""

__version__ = "0.1.0"
