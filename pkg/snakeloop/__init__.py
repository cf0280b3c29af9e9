"""snakeloop - Continuation of patterned fronts and localized patterned states."""

__version__ = "0.1.0"
