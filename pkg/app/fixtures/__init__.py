"""Shipped experiment configs (JSON) and tabulated R-D tables (CSV)."""
