"""Tests for the gaussdigits dataset generator."""
