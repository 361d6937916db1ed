"""Test suite for the jigsaw transfer protocol.

This package contains tests for the protocol core, the transport layer, session-state files and the CLI.
"""
