"""Collaborative filtering for boolean swipe feedback, with a three-perspective evaluation harness."""

__version__ = "0.1.0"
