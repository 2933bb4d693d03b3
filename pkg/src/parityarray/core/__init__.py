"""
Core functionality for parityarray
"""
