"""
returnctl - fluid-based intervention policies for a multiserver queue with returns
"""

__version__ = "0.1.0"
