"""Boolean-logic training of binary networks with a flip optimizer."""

__version__ = "0.1.0"
