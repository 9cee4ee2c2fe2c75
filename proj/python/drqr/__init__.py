"""Query reformulation pipeline: indexing, ranking, QPP, seq2seq and RL training."""

from drqr._core import *  # noqa: F401,F403
from drqr._core import __doc__  # noqa: F401
