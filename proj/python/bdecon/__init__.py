from ._bdecon import *  # noqa: F401,F403
from ._bdecon import __version__  # noqa: F401
