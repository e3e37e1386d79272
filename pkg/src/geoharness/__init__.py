"""Controlled search/crawl harness for measuring how coordinated synthetic
evidence ecosystems steer web-search agents."""

__version__ = "0.1.0"
