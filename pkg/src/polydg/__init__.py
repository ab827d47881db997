"""Polytopal discontinuous Galerkin solver for the 2D complex Ginzburg-Landau equation."""
__version__ = "0.1.0"
