"""Render figures from quenchlab results bundles (pure JSON, no physics)."""

__version__ = "0.1.0"

from .render import (
    FigureSpec,
    MissingQuantity,
    load_results,
    render,
    render_decomposition_check,
)

__all__ = [
    "FigureSpec",
    "MissingQuantity",
    "load_results",
    "render",
    "render_decomposition_check",
]
