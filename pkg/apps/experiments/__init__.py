"""Experiment runner: config parsing, single runs, sweeps, calibration reports and the run ledger."""
