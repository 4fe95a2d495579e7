"""Tests for disfluency-mapper."""
