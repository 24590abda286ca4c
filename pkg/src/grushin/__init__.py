"""Numerical toolkit for Helmholtz-type problems of the Baouendi-Grushin operator.

Gauge geometry and sphere quadrature, analytic reference fields with exact
derivatives, a finite-difference solver in gauge-polar coordinates, sphere
functionals and ring estimates, and a degenerate extension solver.
"""

__version__ = "0.1.0"
