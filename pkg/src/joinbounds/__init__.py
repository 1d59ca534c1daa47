"""Worst-case and average-case size bounds for relational joins, the
instances that attain them, and plans that evaluate joins within them."""

from .errors import (CapabilityError, CapacityError, DomainError, InvariantError,
                     JoinBoundsError, ParseError)
from .query import JoinQuery, RelationSchema, parse_query

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "CapacityError", "DomainError", "InvariantError",
    "JoinBoundsError", "JoinQuery", "ParseError", "RelationSchema", "parse_query",
]
