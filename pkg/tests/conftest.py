# Makes this directory importable (neighbors.py helpers) under pytest.
