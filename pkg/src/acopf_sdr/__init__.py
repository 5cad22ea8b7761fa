"""Semidefinite relaxation of AC optimal power flow from MATPOWER cases."""

__version__ = "0.1.0"
