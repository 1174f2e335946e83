"""Tests for tumorcal"""
