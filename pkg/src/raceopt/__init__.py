"""Gradient-free multi-domain optimization of a simulated autonomous race car.

Jointly tunes physical (mass, CoG), decision-making (raceline shape,
velocity range) and control (path tracker) parameters to minimize the
2-lap time of a single-track vehicle model, using six gradient-free
optimizers behind a generation-synchronous ask/tell interface.
"""

__version__ = "0.1.0"
