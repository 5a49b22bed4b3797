"""Risk-limiting audits for 2-seat STV elections."""

__version__ = "0.1.0"
