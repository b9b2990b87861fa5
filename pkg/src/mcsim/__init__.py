"""Discrete-event simulator for PDCP-anchored multi-connectivity.

Core package: event engine, trace-driven radio paths, PDCP split/duplication
transmitter, reordering receiver, UDP/TCP traffic endpoints, metrics, and a
scenario/matrix harness.  A FastAPI service (`mcsim.service`) and a thin CLI
(`mcsim.cli`) sit on top.
"""

__version__ = "0.1.0"
