"""Automata with boundary: composition algebra, deadlock checking and simulations."""

from .core import ActionSet, Automaton, Behaviour, ModelError, Motion
from .design import System, evaluate, flatten, successors
from .checker import bfs_deadlocks, misa_deadlocks
from .simulation import Comparison, verify_simulation

__version__ = "0.1.0"

__all__ = ["ActionSet", "Automaton", "Behaviour", "ModelError", "Motion", "System",
           "evaluate", "flatten", "successors", "bfs_deadlocks", "misa_deadlocks",
           "Comparison", "verify_simulation", "__version__"]
