"""Finite-fuel optimal liquidation with transient multiplicative impact."""
