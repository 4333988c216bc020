"""Offline training pipeline for the privgrid theft detector.

Synthesizes labeled meter-days from honest readings (six tampering
behaviours per honest day), balances classes with ADASYN, trains the
LSTM detector, quantizes the first layer, and exports a weight file in
the detector's documented JSON format.

This package is deliberately independent of the detector implementation:
it interoperates only through the readings CSV schema, the weight-file
format, and the frozen attack-parity fixtures.
"""

__version__ = "0.1.0"
