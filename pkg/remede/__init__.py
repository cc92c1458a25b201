"""Recurrent memory decision trees trained end-to-end with straight-through gradients."""
__version__ = "0.1.0"
