"""Tabular MDP solving and switching-system geometry for Q-value iteration."""

__version__ = "0.1.0"
