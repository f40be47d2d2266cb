"""Phishing URL detection with loopy belief propagation over a heterogeneous graph."""

__version__ = "0.1.0"
