"""Dump a classifier's softmax outputs into the embedding CSV format.

The output files feed the ebtree toolkit through its file interface:
``id,label,pred,d0..d{C-1}`` with one row per kept sample, ids being
dataset indices so images can be looked up later.
"""

from .config import ExtractorConfig
from .extract import extract

__version__ = "0.1.0"
