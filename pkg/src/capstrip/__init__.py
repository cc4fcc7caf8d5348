"""Water waves with surface tension: Dirichlet-Neumann operator, symbol calculus,
nonlinear and linearized evolution on a periodic domain."""

__version__ = "0.1.0"
