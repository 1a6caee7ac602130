"""oodr: out-of-distribution road obstacle sequences — detection
post-processing, tracking, retrieval and evaluation."""

__version__ = "0.1.0"
