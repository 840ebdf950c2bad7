"""Variable abstraction of multi-agent graphs with may/must preservation."""
__version__ = "0.1.0"
