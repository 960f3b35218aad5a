"""simq command line."""

from .main import create_parser, main
from .online import cmd_online
from .pretrain import cmd_pretrain
from .score import cmd_score
from .surface import cmd_surface
from .sweep import cmd_sweep

__all__ = [
    "create_parser",
    "main",
    "cmd_online",
    "cmd_pretrain",
    "cmd_score",
    "cmd_surface",
    "cmd_sweep",
]
