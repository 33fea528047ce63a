"""P1 finite elements for traction-free Lamé eigenproblems with normal or
tangential trace constraints on part of the boundary."""

__version__ = "0.1.0"
