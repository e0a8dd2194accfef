"""Bayesian network structure elicitation from language models.

Subpackages: ``bn`` (structures and file formats), ``metrics`` (SHD,
F-score, signed-rank test), ``llm`` (chat backends, transcripts), and
``runner`` (experiment grids). The elicitation methods live in ``delphi``
and ``harness``; the training-data probe in ``contamination``.
"""

__version__ = "0.1.0"
