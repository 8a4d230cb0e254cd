"""tollgrid: pollution-aware road tolling over an embedded pub/sub pipeline."""

__version__ = "0.1.0"
