"""Adversarial graph generation of small molecules with an inverse (encoder) network."""
__version__ = "0.1.0"
