"""Numerical verification toolkit for a Carleman-estimate uniqueness argument.

The package instantiates the weight system, the pointwise expansion of the
weighted operator, the divergence identities, the integral-operator bounds
and the reduction of an ultrahyperbolic inverse source problem to an
integro-differential Cauchy problem, and checks each of them on sampled
points or by quadrature.
"""

__version__ = "0.1.0"
