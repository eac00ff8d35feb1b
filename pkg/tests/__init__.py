"""
boolcd Test Suite

Tests for Boolean Tucker factorization, streaming updates, change reports
and the command-line and HTTP surfaces.
"""
