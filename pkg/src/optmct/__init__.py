"""Exact engine for classical operational probabilistic theories and the
minimal classical theory generated by preparations, observations,
identities and swaps."""

__version__ = "0.1.0"
