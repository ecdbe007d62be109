"""Feed-forward neural networks trained from scratch on MNIST."""

__version__ = "0.1.0"
