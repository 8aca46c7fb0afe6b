"""Tests for wtapool."""
