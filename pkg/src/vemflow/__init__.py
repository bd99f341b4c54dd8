"""Virtual element solver for miscible displacement in porous media."""

from . import exceptions, forms, mesh, metrics, physics, solver, vem

__version__ = "0.1.0"

__all__ = ["exceptions", "forms", "mesh", "metrics", "physics", "solver", "vem"]
