"""
The :py:mod:`rail.restless` package learns to play restless bandits whose
arms are birth-death Markov chains.  It provides the exact belief-MDP
solver, the learning policies, an experiment runner and a suite of
executable checks of the dominance and concentration properties the
learning guarantees rest on.
"""

from . import library
from .chain_core import BirthDeathChain, RestlessInstance
from .experiment import ExperimentConfig, run_experiment
from .verification import VerificationConfig, verify_lemmas

try:
    from ._version import __version__
except ImportError:  # pragma: no cover
    __version__ = "unknown"


__all__ = [
    "library",
    "BirthDeathChain",
    "RestlessInstance",
    "ExperimentConfig",
    "run_experiment",
    "VerificationConfig",
    "verify_lemmas",
    "__version__",
]
