"""Exact simulation of delayed-choice quantum erasers.

Mach-Zehnder eraser with polarization-entangled photon pairs, the two-slit
which-way variant, and a seeded coincidence-counting harness.
"""
__version__ = "0.1.0"
