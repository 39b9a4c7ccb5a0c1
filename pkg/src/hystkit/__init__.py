"""Magnetic hysteresis toolkit.

Synthetic B-H loop generation (Preisach, Duhem, Bouc-Wen), recurrent models
trained on a major loop, and closed-loop generalization scoring on reversal
curves and minor loops.
"""

__version__ = "0.1.0"
