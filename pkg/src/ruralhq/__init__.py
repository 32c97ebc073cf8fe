"""Crowdsourced rural housing-quality scoring, CNN score-distribution
regression, and hierarchical regional inequality analytics."""

__version__ = "0.1.0"
