"""Desk-scale laboratory for stochastic incompressible Euler flows on the
flat 2-torus: spectral fields, Q-Wiener noise, Ito/Stratonovich SDE
integration with exit-time localization, and Eulerian / Lagrangian
formulations of the stochastically forced Euler and averaged Euler-alpha
equations.
"""

__version__ = "0.1.0"
