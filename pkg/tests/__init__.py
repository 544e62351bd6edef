"""
Tests for the Fredholm solver
"""
