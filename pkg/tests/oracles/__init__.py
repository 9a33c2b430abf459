"""Independent reference computations for the test suite.

Nothing in this package may import from ``taloskit``'s dynamics, geometry or
link modules; ``tests/test_oracle_independence.py`` enforces it.
"""
