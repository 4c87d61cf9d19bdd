"""Task backend implementations."""
