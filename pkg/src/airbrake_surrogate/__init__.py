"""Airbrake decision toolkit: an RK4-based apogee-prediction oracle for a
coasting sounding rocket, a from-scratch MLP surrogate trained on
oracle-labeled data, and an evaluation/benchmark harness comparing the two.
"""

__version__ = "0.1.0"
