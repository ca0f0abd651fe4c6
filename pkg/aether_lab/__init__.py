"""aether-lab: homogenization and elastodynamics of two-phase periodic elastic media."""

__version__ = "0.1.0"
FORMAT_VERSION = 1
