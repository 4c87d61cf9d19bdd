"""ghostfl simulator apps."""
