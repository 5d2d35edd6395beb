"""Deep autoencoder collaborative filtering (C++ core)."""

from ._deeprec import *  # noqa: F401,F403
from ._deeprec import __doc__  # noqa: F401
