"""
blockreg: block-regularized Bayesian sparse regression for association mapping.

Sparse linear regression with a spike-and-Laplace prior whose activation
indicators follow a recombination-aware Markov chain, together with the
comparison methods, a block-structured simulator and a precision-recall
benchmark.
"""

__version__ = "1.0.0"
