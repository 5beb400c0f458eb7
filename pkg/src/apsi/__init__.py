"""System identification of LTI channels from signals with discrete spectra."""

__version__ = "0.1.0"
