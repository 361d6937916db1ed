"""Packet framing, packet-stream files and the simulated channel."""
