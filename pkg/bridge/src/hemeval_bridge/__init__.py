"""Checkpoint-to-JSONL export bridge for the hemeval toolkit."""

__version__ = "0.1.0"
