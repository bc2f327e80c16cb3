"""
Attention-based random forests.

Tree ensembles whose per-instance tree weights come from a softmax over
leaf distances, optionally contaminated by a trained bias (Huber's
epsilon-contamination model) or with trained softmax parameters.
"""

__version__ = "0.1.0"
