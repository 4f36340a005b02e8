"""Dual-hop RF/THz fixed-gain relay link analysis.

Closed-form outage, average BER and ergodic capacity via bivariate Fox
H-function quadrature, cross-validated against a physical-layer Monte Carlo
simulator sharing the same channel primitives.

Submodules
----------
specfun
    Fox H-function kernels and Mellin-Barnes contour quadrature.
channels
    Fading envelopes, pointing error, SNR densities, link budgets.
egc
    Equal-gain combining and the matched single-envelope approximation.
montecarlo
    Physical-layer simulator and empirical metric estimators.
analytics
    Closed-form end-to-end PDF, outage, BER, capacity and asymptotics.
cli
    Batch sweep runner producing CSV artifacts.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
