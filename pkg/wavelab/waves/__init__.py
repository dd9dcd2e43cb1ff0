"""
Solitary waves, the linearized operator and the approximate solution.
"""
