"""Multi-modal attention models for anticancer drug-sensitivity prediction."""

__version__ = "0.1.0"
