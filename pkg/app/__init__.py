"""
Stochastic generalized Lotka-Volterra simulation, inference and experiments.
"""

__version__ = "0.1.0" 