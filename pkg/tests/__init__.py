"""Test suite for sentiment-ensemble."""
