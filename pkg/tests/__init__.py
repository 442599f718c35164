"""Tests for the relaygap package."""
