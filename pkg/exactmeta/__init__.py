"""
exactmeta - Monte Carlo conditional likelihood-ratio confidence intervals and
regions for random-effects meta-analysis.
"""
__version__ = "0.1.0"
