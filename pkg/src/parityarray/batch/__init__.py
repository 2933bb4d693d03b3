"""
Batch sweep functionality for parityarray
"""
