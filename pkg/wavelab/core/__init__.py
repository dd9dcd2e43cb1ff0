"""
Grids, spectral operators and the model constants.
"""
