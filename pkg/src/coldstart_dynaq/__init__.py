"""Adjusted Dyna-Q with STC schedules and transfer-learning warm starts
for cold-start perishable-inventory control."""

__version__ = "0.1.0"
