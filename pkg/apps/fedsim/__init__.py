"""Federated orchestration: client sampling, local training, aggregation and global updates."""
