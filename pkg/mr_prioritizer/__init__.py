"""
MR Prioritizer: order metamorphic relations for regression testing and
evaluate the orderings against a validation fault set.
"""

__version__ = "0.3.0"
