"""Finite-scale computations with labeled Schreier graphs."""
__version__ = "0.1.0"

from ._util import BudgetExceeded, FrontierError, UrsLabError

__all__ = ["BudgetExceeded", "FrontierError", "UrsLabError", "__version__"]
