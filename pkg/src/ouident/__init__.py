"""Heat kernel, semigroup and resolvent of complex Ornstein-Uhlenbeck systems."""

__version__ = "0.1.0"
