"""Quantum artificial life: individuals as genotype/phenotype qubit pairs on a torus."""

__version__ = "0.1.0"
