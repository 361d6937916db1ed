"""Core of the jigsaw transfer protocol.

This package provides the field arithmetic, key material, tearing, all-or-nothing
transform, packet authentication and the sender/receiver session machinery.
"""
