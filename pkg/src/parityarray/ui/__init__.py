"""
User interface modules for parityarray
"""
