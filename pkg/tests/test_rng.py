"""
Tests for named random streams.
"""
import secrets

from src.jigsaw.rng import R_STREAM, TEAR_STREAM, RandomSource


def test_seeded_streams_are_reproducible():
    """Test that equal seeds give equal streams, whatever form the seed takes."""
    for seed in (42, b"\x2a", "2a"):
        assert RandomSource(seed).stream(TEAR_STREAM).getrandbits(64) == RandomSource(42).stream(
            TEAR_STREAM
        ).getrandbits(64), f"Seed {seed!r} should match the integer seed 42"


def test_named_streams_are_independent():
    """Test that drawing from one stream does not shift another."""
    first = RandomSource(1)
    second = RandomSource(1)
    first.stream(TEAR_STREAM).getrandbits(256)
    assert first.stream(R_STREAM).getrandbits(64) == second.stream(R_STREAM).getrandbits(64), "Streams are separate"
    assert RandomSource(1).stream("a").random() != RandomSource(1).stream("b").random(), "Names select streams"


def test_stream_is_cached():
    """Test that a stream is created once per name."""
    source = RandomSource(3)
    assert source.stream(TEAR_STREAM) is source.stream(TEAR_STREAM)


def test_unseeded_source_uses_system_random():
    """Test that no seed means the operating system CSPRNG."""
    source = RandomSource()
    assert not source.seeded
    assert isinstance(source.stream(R_STREAM), secrets.SystemRandom)


def test_nonzero_block_is_never_zero():
    """Test rejection sampling on a tiny block size."""
    source = RandomSource(5)
    values = {source.nonzero_block(8, R_STREAM).value for _ in range(6000)}
    assert 0 not in values, "Zero should never be drawn"
    assert len(values) == 255, "Every nonzero octet should eventually appear"
