"""Phase-polynomial circuit optimizer."""
