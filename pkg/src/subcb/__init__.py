"""Contextual bandits with monotone submodular rewards under matroid constraints."""

__version__ = "0.1.0"
