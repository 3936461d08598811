"""Symbol-detection workbench: decision-feedback in-context Transformer
detector, classical baselines, and the linear-attention theory lab."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
