"""Tools for deciding which external data sources to add to a training set.

The library estimates train/test distribution divergence with
classifier-based heuristics, simulates sequential and mixture data
accumulation, and evaluates the downstream effect on model performance,
worst-group accuracy, and disparity.
"""

__version__ = "0.1.0"
