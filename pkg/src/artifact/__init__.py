"""Textometric analysis toolkit: starred corpora, lexical specificity,
descending hierarchical classification and transfer of predicted
metadata between corpora."""

__version__ = "0.1.0"
