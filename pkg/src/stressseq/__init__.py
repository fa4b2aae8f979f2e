"""Semi-supervised sequence learning for wearable stress detection."""

__version__ = "0.1.0"
