"""capexlab: capacity-expansion model variants on one harmonized scenario."""

__version__ = "0.1.0"
