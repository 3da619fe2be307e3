"""Test suite for choreo.

Unit tests of the choreo package plus end-to-end checks of the command line over the bundled corpus.
"""
