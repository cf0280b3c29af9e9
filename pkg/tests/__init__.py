"""Tests for PullSaw."""
