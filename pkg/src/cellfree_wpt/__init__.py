"""Wireless-powered cell-free massive MIMO: channel simulation, closed-form
energy/spectral-efficiency evaluation, and max-min fair resource optimization."""

__version__ = "0.1.0"
