"""Multi-objective tuning of coding-agent configurations (correctness, code speedup, agent runtime)."""

__version__ = "0.1.0"
