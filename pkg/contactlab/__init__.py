"""
Contactlab: curvature and identity verification for 3-dimensional contact
metric structures on explicit charts.
"""

__version__ = "0.1.0"
