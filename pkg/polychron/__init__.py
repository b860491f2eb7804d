"""Look-up-table spiking networks."""

__version__ = "0.1.0"
