# aether-lab test suite
