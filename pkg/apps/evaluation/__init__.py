"""Measurement: open-set decisions, benign accuracy, trigger rate, attack success and OSI errors."""
