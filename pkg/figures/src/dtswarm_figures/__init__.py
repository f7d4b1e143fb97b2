"""Figure generation for dtswarm sweep results.

Pure post-processing over the simulator's CSV outputs (summary.csv and
the optional per_field.csv PER grid); never imports simulator internals.
"""

from .render import (
    EmptyInputError,
    FigureSpec,
    KINDS,
    MissingColumnError,
    render,
    summary_stats,
)

__all__ = [
    "EmptyInputError",
    "FigureSpec",
    "KINDS",
    "MissingColumnError",
    "render",
    "summary_stats",
]
