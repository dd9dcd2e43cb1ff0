"""
wavelab: solitary waves of the abcd Boussinesq system over a slowly varying bottom.
"""

__version__ = "0.4.0"
