"""Random-cluster representations, couplings and samplers for lattice spin systems."""
__version__ = "0.1.0"
