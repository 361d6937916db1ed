"""
Tests for sender and receiver sessions.
"""
import random
from concurrent.futures import ThreadPoolExecutor

import pytest

from src.jigsaw.codec import (
    FLAG_FLUSH,
    FLAG_GROUP_FINAL,
    FLAG_PADDING,
    ReceiverSession,
    SenderSession,
    Slot,
    mask_run,
)
from src.jigsaw.errors import (
    BoundsError,
    IncompleteMessageError,
    IncompleteStreamError,
    MalformedBlockError,
    ProtocolError,
)
from src.jigsaw.field import Block, add
from src.jigsaw.keymat import Mode, PadState
from src.jigsaw.rng import RandomSource
from src.jigsaw.tear import Part, affix, embed
from tests.secret_helper import make_secret, transfer


def _masked_run(secret, pad: PadState, blocks, r: Block):
    """Mask hand-built data blocks and R under `pad`, as a sender would."""
    return mask_run(list(blocks) + [r], pad.p)


def _laid(bits: str, ps: int) -> Block:
    marked = affix(Part.from_bit_string(bits), ps)
    return embed(marked, 1, ps)


def test_roundtrip_in_every_mode(mode_secret, payload, text_message):
    """Test that consecutive messages arrive intact in every mode."""
    assert transfer(mode_secret, [payload, text_message]) == payload + text_message, "Data should roundtrip"


def test_roundtrip_of_empty_and_tiny_messages(mode_secret):
    """Test messages too small to fill a run."""
    assert transfer(mode_secret, [b""]) == b"", "An empty message should give nothing"
    assert transfer(mode_secret, [b"x"]) == b"x", "A single octet should roundtrip"
    assert transfer(mode_secret, [b"", b"ab", b""]) == b"ab", "Empty messages around data change nothing"


def test_roundtrip_sweep(roundtrip_configs):
    """Test random (PS, k, mode, messages) configurations."""
    rng = random.Random(2024)
    for index in range(roundtrip_configs):
        ps = rng.choice([8, 16, 32, 64, 128])
        k = rng.choice([2, 3, 4, 5, 7, 8, 16])
        mode = rng.choice(list(Mode))
        secret = make_secret(ps=ps, k=k, mode=mode, seed=index)
        messages = [rng.randbytes(rng.choice([0, 1, 31, 150, 1024])) for _ in range(rng.randint(1, 3))]
        recovered = transfer(secret, messages, seed=index)
        assert recovered == b"".join(messages), f"Config {index} (PS={ps}, k={k}, {mode.label}) should roundtrip"


def test_runs_are_k_consecutive_sequence_numbers(secret, payload):
    """Test emission numbering and the unflagged R slot."""
    sender = SenderSession(secret, rng=RandomSource(3))
    emissions = sender.push(payload) + sender.flush()
    assert len(emissions) % secret.k == 0, "Only whole runs should be emitted"
    assert [e.seq for e in emissions] == list(range(len(emissions))), "Sequence numbers should be consecutive"
    for start in range(0, len(emissions), secret.k):
        assert emissions[start + secret.k - 1].flags == 0, "The R slot should carry no flags"
    assert sender.next_seq == len(emissions), "The next sequence number should follow the last emission"


def test_flush_marks_last_data_slot_and_pads_the_run(secret):
    """Test FLUSH and PADDING flags on a partial run."""
    sender = SenderSession(secret, rng=RandomSource(4))
    assert sender.push(b"\x81") == [], "One octet should not fill a run"
    emissions = sender.flush()
    flags = [e.flags for e in emissions]
    assert len(emissions) == secret.k, "Flush should emit exactly one run"
    assert flags[0] & FLAG_FLUSH, "The last data slot should be flagged FLUSH"
    assert all(f == FLAG_PADDING for f in flags[1 : secret.k - 1]), "The remaining data slots should be padding"
    assert sender.flush() == [], "A second flush should emit nothing"


def test_unflushed_data_waits_for_more(secret):
    """Test that a partial run stays queued across pushes."""
    sender = SenderSession(secret, rng=RandomSource(5))
    receiver = ReceiverSession(secret)
    out = bytearray()
    for emission in sender.push(b"hello"):
        out += receiver.push(emission.flags, emission.payload)
    assert len(sender.buffer) > 0, "Some slots should remain queued"
    for emission in sender.push(b" world") + sender.flush():
        out += receiver.push(emission.flags, emission.payload)
    assert bytes(out) == b"hello world", "Queued data should arrive after the next push and flush"


def test_pads_stay_in_step(secret, payload):
    """Test that sender and receiver evolve the same pad."""
    sender = SenderSession(secret, rng=RandomSource(6))
    receiver = ReceiverSession(secret)
    for emission in sender.push(payload):
        receiver.push(emission.flags, emission.payload)
    assert sender.pad == receiver.pad, "Both ends should hold the same pad after every whole run"
    assert sender.pad.run_index == sender.runs_emitted, "The run index should count the runs"


def test_seeded_sessions_are_deterministic(mode_secret, payload):
    """Test that equal seeds give equal emissions."""
    first = SenderSession(mode_secret, rng=RandomSource(9))
    second = SenderSession(mode_secret, rng=RandomSource(9))
    assert first.push(payload) + first.flush() == second.push(payload) + second.flush(), "Emissions should match"


def test_parallel_masking_gives_identical_output(secret, payload):
    """Test that the thread-pool masking path changes nothing."""
    serial = SenderSession(secret, rng=RandomSource(10))
    with ThreadPoolExecutor(max_workers=4) as executor:
        parallel = SenderSession(secret, rng=RandomSource(10), executor=executor)
        expected = serial.push(payload) + serial.flush()
        assert parallel.push(payload) + parallel.flush() == expected, "Parallel masking should match serial"


def test_base_mode_counters(secret, payload):
    """Test k masking XORs, k - 1 transform XORs and one multiplication per run."""
    sender = SenderSession(secret, rng=RandomSource(12))
    sender.push(payload)
    runs = sender.runs_emitted
    assert runs > 0, "The payload should fill at least one run"
    assert sender.counters.block_xors == runs * (2 * secret.k - 1), "XORs should be (2k - 1) per run"
    assert sender.counters.block_mults == runs, "One multiplication per run"


def test_observer_sees_pre_masking_blocks(secret, payload):
    """Test that RunTrace records match the emitted payloads."""
    traces = []
    sender = SenderSession(secret, rng=RandomSource(13), observer=traces.append)
    emissions = sender.push(payload)
    assert len(traces) == sender.runs_emitted, "One trace per run"
    first = traces[0]
    for i, x in enumerate(first.x):
        assert add(x, first.pad[i]) == emissions[i].payload, f"Slot {i + 1} should be x XOR P_{i + 1}"
    assert add(first.r, first.pad[-1]) == emissions[secret.k - 1].payload, "The last slot should be R XOR P_k"
    assert first.x == first.plain, "Outside AONT mode the plain blocks are the laid blocks"


def test_aont_groups_are_marked_final():
    """Test that every AONT message group ends with a GROUP_FINAL slot."""
    secret = make_secret(mode=Mode.AONT)
    traces = []
    sender = SenderSession(secret, rng=RandomSource(14), observer=traces.append)
    emissions = sender.push(b"group one") + sender.push(b"group two") + sender.flush()
    finals = [e for e in emissions if e.flags & FLAG_GROUP_FINAL]
    assert len(finals) == 2, "Each message should close one group"
    assert any(t.x != t.plain for t in traces), "Transformed blocks should differ from the plain ones"


def test_sender_rejects_oversized_resume_buffer(secret):
    """Test that a resumed buffer must leave room in the run."""
    slot = Slot(0, Block(3, 64), Block(3, 64))
    with pytest.raises(BoundsError):
        SenderSession(secret, buffer=[slot] * (secret.k - 1))


def test_receiver_rejects_reserved_flags(secret):
    """Test that unknown flag bits are a protocol error."""
    with pytest.raises(ProtocolError):
        ReceiverSession(secret).push(0x80, Block(0, 64))


def test_receiver_rejects_wrong_payload_size(secret):
    """Test that payloads must be PS bits."""
    with pytest.raises(BoundsError):
        ReceiverSession(secret).push(0, Block(0, 32))


def test_receiver_close_with_partial_run_raises(secret):
    """Test that a session cannot end inside a run."""
    sender = SenderSession(secret, rng=RandomSource(15))
    receiver = ReceiverSession(secret)
    emissions = sender.push(b"abc") + sender.flush()
    for emission in emissions[:-1]:
        receiver.push(emission.flags, emission.payload)
    with pytest.raises(IncompleteMessageError):
        receiver.close()


def test_receiver_rejects_zero_r(secret):
    """Test that a run whose R unmasks to zero is refused."""
    pad = PadState.initial(secret)
    blocks = [_laid("1010", 64)] * (secret.k - 1)
    run = _masked_run(secret, pad, blocks, Block.zero(64))
    receiver = ReceiverSession(secret)
    with pytest.raises(ProtocolError):
        for payload in run:
            receiver.push(0, payload)


def test_receiver_rejects_block_without_markers(secret):
    """Test that a data block with fewer than two set bits is malformed."""
    pad = PadState.initial(secret)
    blocks = [Block(1, 64)] + [_laid("", 64)] * (secret.k - 2)
    run = _masked_run(secret, pad, blocks, Block(5, 64))
    receiver = ReceiverSession(secret)
    with pytest.raises(MalformedBlockError):
        for payload in run:
            receiver.push(0, payload)


def test_flush_with_dangling_bits_raises(secret):
    """Test that a FLUSH slot must leave the stream on an octet boundary."""
    pad = PadState.initial(secret)
    blocks = [_laid("101", 64)] + [_laid("", 64)] * (secret.k - 2)
    run = _masked_run(secret, pad, blocks, Block(5, 64))
    flags = [FLAG_FLUSH] + [FLAG_PADDING] * (secret.k - 2) + [0]
    receiver = ReceiverSession(secret)
    with pytest.raises(IncompleteStreamError):
        for f, payload in zip(flags, run):
            receiver.push(f, payload)


def test_hand_built_run_decodes(secret):
    """Test decoding a run assembled from known parts."""
    pad = PadState.initial(secret)
    parts = ["0100", "1000", "0110", "0001"]
    blocks = [_laid(bits, 64) for bits in parts][: secret.k - 1]
    run = _masked_run(secret, pad, blocks, Block(0x1234, 64))
    receiver = ReceiverSession(secret)
    out = b"".join(receiver.push(0, payload) for payload in run)
    assert out == bytes([0b01001000, 0b01100001]), "Parts should concatenate into two octets"
    receiver.close()


@pytest.mark.slow
def test_roundtrip_with_large_blocks(fake):
    """Test PS = 4096, which needs a discovered polynomial."""
    secret = make_secret(ps=4096, k=3)
    message = fake.binary(length=20000)
    assert transfer(secret, [message]) == message, "Large blocks should roundtrip"


def test_pad_never_repeats_over_a_thousand_runs():
    """Test that P_1 differs in every one of at least 1000 runs."""
    secret = make_secret(ps=64, k=2, seed=21)
    traces = []
    sender = SenderSession(secret, rng=RandomSource(22), observer=traces.append)
    sender.push(bytes(range(256)) * 32)
    sender.flush()
    assert len(traces) >= 1000, "Each part should fill a run at k = 2"
    assert len({trace.pad[0] for trace in traces}) == len(traces), "P_1 should be fresh in every run"
    assert [trace.run_index for trace in traces] == list(range(len(traces))), "Runs should be numbered in order"


@pytest.mark.slow
@pytest.mark.parametrize("ps", [64, 128, 1024])
@pytest.mark.parametrize("k", [2, 3, 7, 16])
def test_large_roundtrip_grid(ps, k):
    """Test large messages over the acceptance grid of PS and k, cycling through the modes."""
    mode = list(Mode)[(ps + k) % 3]
    size = 1 << 20 if ps == 1024 else 1 << 16
    data = random.Random(ps * k).randbytes(size)
    secret = make_secret(ps=ps, k=k, mode=mode, seed=k)
    assert transfer(secret, [data[: size // 3], data[size // 3 :]], seed=ps) == data, f"PS={ps}, k={k} should roundtrip"
