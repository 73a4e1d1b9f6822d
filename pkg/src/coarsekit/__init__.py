"""coarsekit: desk-scale numerics for coarse geometry.

Finite metric spaces and covers, covering maps with injectivity windows,
finite-propagation operators and their lifts, operator norm localisation,
quantitative projection/unitary bookkeeping, Sobolev norms, and
small-cancellation relator schedules.
"""

__version__ = "0.1.0"
