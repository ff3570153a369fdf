"""Arbitrary-order discrete de Rham divdiv complex on polyhedral meshes."""

__version__ = "0.1.0"
