"""Satellite-to-underwater laser link channel simulator.

The link is modelled in three stages: an analytical atmospheric channel
(mean irradiance and correlated lognormal fading above the sea), a random
air/water interface (Cox-Munk facet refraction), and a semi-analytic Monte
Carlo underwater channel with oceanic turbulence.  :mod:`stulc.metrics`
turns the resulting power statistics into BER and outage figures.
"""

__version__ = "0.1.0"
