"""Spectral calculus on the periodic unit cell and the inequality experiments."""

from . import config, experiments, fields, grid
from .config import *  # noqa: F401,F403
from .experiments import *  # noqa: F401,F403
from .fields import *  # noqa: F401,F403
from .grid import *  # noqa: F401,F403

__all__ = [*grid.__all__, *fields.__all__, *experiments.__all__, *config.__all__]
