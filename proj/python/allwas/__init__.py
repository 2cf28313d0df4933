"""Python bindings for the allwas C++ core."""

from ._allwas import *  # noqa: F401,F403
from ._allwas import Error, ConfigError, DataError, RuntimeFailure  # noqa: F401
