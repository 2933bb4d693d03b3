"""
Utility functions for parityarray
"""
