"""
Time evolution, conserved quantities and modulation tracking.
"""
