# app_package/__init__.py
"""
Driven-qubit geometric phase simulator: a Lorentzian-bath hierarchy solver
with a pseudomode cross-check.
"""

__version__ = "1.0.0"
