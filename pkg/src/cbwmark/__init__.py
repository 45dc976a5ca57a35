"""Dataset watermarking and statistical ownership verification for
speaker-verification corpora."""

__version__ = "0.1.0"
