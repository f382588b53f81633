"""Tests for the stablecoin ADMM stack."""
