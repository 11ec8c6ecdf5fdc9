"""Aliasing analysis toolkit and desk-scale anti-aliased CNN experiments."""

__version__ = "0.1.0"
