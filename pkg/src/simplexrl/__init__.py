"""Reinforcement learning on the probability simplex.

Dirichlet and Gaussian-softmax policies, a soft actor-critic trainer,
a multi-battery power-allocation environment, and a gradient lab for
checking policy-gradient bias and variance claims empirically.
"""

__version__ = "0.1.0"
