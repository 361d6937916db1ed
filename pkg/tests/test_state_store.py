"""
Tests for session-state persistence.
"""
import pytest

from src.database.connection import execute_query, transaction
from src.database.state_store import (
    load_receiver_state,
    load_sender_state,
    open_state,
    save_receiver_state,
    save_sender_state,
)
from src.jigsaw.codec import ReceiverSession, SenderSession
from src.jigsaw.errors import StateFileError, StateMismatchError
from src.jigsaw.keymat import Mode
from src.jigsaw.rng import RandomSource
from tests.secret_helper import make_secret


def test_open_state_creates_tables(state_db):
    """Test that a new state file holds the schema and no session."""
    tables = {row["name"] for row in execute_query(state_db, "SELECT name FROM sqlite_master WHERE type = 'table'")}
    assert {"schema_version", "session", "pad_blocks", "slots"} <= tables, "All state tables should exist"
    assert execute_query(state_db, "SELECT * FROM session") == [], "No session should be stored yet"


def test_empty_state_gives_fresh_sessions(state_db, secret):
    """Test that loading from an empty file starts at the initial pad."""
    sender = load_sender_state(state_db, secret)
    receiver = load_receiver_state(state_db, secret)
    assert sender.next_seq == 0 and sender.buffer == [], "A fresh sender starts at seq 0 with nothing queued"
    assert receiver.expected_seq == 0 and receiver.pad == sender.pad, "Both start from the initial pad"


def test_sender_state_roundtrip(state_db, mode_secret, text_message):
    """Test that pad, sequence counter, queued slots and tail survive a save and load."""
    sender = SenderSession(mode_secret, rng=RandomSource(1))
    sender.push(text_message)
    save_sender_state(state_db, sender)
    loaded = load_sender_state(state_db, mode_secret)
    assert loaded.pad == sender.pad, "The pad should be restored"
    assert loaded.next_seq == sender.next_seq, "The sequence counter should be restored"
    assert loaded.buffer == sender.buffer, "Queued slots should be restored"
    assert loaded.tail == sender.tail, "The full-block tail should be restored"


def test_receiver_state_roundtrip_mid_run(state_db, secret, payload):
    """Test that a receiver saved inside a run resumes where it stopped."""
    sender = SenderSession(secret, rng=RandomSource(2))
    emissions = sender.push(payload) + sender.flush()
    cut = secret.k + 2
    receiver = ReceiverSession(secret)
    out = b"".join(receiver.push(e.flags, e.payload) for e in emissions[:cut])
    save_receiver_state(state_db, receiver)

    resumed = load_receiver_state(state_db, secret)
    assert resumed.expected_seq == cut, "The expected sequence number should be restored"
    assert resumed.pending == receiver.pending, "The partial run should be restored"
    assert resumed.stream_pending == receiver.stream_pending, "Dangling bits should be restored"
    out += b"".join(resumed.push(e.flags, e.payload) for e in emissions[cut:])
    resumed.close()
    assert out == payload, "The resumed receiver should finish the message"


def test_resume_across_messages_in_a_file(tmp_path, mode_secret):
    """Test one message per invocation on both ends, reopening the state files each time."""
    sender_path, receiver_path = tmp_path / "send.db", tmp_path / "recv.db"
    messages = [b"first message ", b"second one ", b"and a third"]
    out = bytearray()
    for index, message in enumerate(messages):
        conn = open_state(sender_path)
        sender = load_sender_state(conn, mode_secret, rng=RandomSource(index))
        emissions = sender.push(message) + (sender.flush() if index == len(messages) - 1 else [])
        save_sender_state(conn, sender)
        conn.close()

        conn = open_state(receiver_path)
        receiver = load_receiver_state(conn, mode_secret)
        if emissions:
            assert receiver.expected_seq == emissions[0].seq, "Sequence numbers should continue"
        for emission in emissions:
            out += receiver.push(emission.flags, emission.payload)
        save_receiver_state(conn, receiver)
        conn.close()
    assert bytes(out) == b"".join(messages), "All messages should arrive across invocations"


def test_state_rejects_other_role(state_db, secret):
    """Test that a sender file cannot be loaded as a receiver and vice versa."""
    save_sender_state(state_db, SenderSession(secret, rng=RandomSource(3)))
    with pytest.raises(StateMismatchError):
        load_receiver_state(state_db, secret)
    save_receiver_state(state_db, ReceiverSession(secret))
    with pytest.raises(StateMismatchError):
        load_sender_state(state_db, secret)


def test_state_rejects_other_keyfile(state_db, secret):
    """Test that a state file is bound to the keyfile fingerprint."""
    save_sender_state(state_db, SenderSession(secret, rng=RandomSource(4)))
    with pytest.raises(StateMismatchError):
        load_sender_state(state_db, make_secret(seed=8))


def test_state_rejects_wrong_pad_size(state_db, secret):
    """Test that a damaged pad table is refused."""
    save_sender_state(state_db, SenderSession(secret, rng=RandomSource(5)))
    state_db.execute("DELETE FROM pad_blocks WHERE position = 0")
    with pytest.raises(StateMismatchError):
        load_sender_state(state_db, secret)


def test_state_rejects_unknown_schema_version(tmp_path):
    """Test that files from another schema version are refused."""
    path = tmp_path / "state.db"
    conn = open_state(path)
    conn.execute("UPDATE schema_version SET version = 99")
    conn.commit()
    conn.close()
    with pytest.raises(StateMismatchError):
        open_state(path)


def test_save_replaces_previous_state(state_db):
    """Test that saving twice leaves a single session with the latest values."""
    secret = make_secret(mode=Mode.AONT)
    sender = SenderSession(secret, rng=RandomSource(6))
    sender.push(b"one")
    save_sender_state(state_db, sender)
    sender.push(b"two")
    sender.push(b"six")
    save_sender_state(state_db, sender)
    assert len(execute_query(state_db, "SELECT * FROM session")) == 1, "Only one session row should exist"
    assert load_sender_state(state_db, secret).buffer == sender.buffer, "The latest buffer should be stored"


def test_failed_save_leaves_previous_state(state_db):
    """Test that a failing statement rolls the whole write back."""
    secret = make_secret(seed=3)
    sender = SenderSession(secret, rng=RandomSource(1))
    sender.push(b"kept")
    save_sender_state(state_db, sender)
    with pytest.raises(StateFileError, match="Overwrite failed"):
        with transaction(state_db, "Overwrite"):
            state_db.execute("DELETE FROM session")
            state_db.execute("INSERT INTO no_such_table VALUES (1)")
    assert len(execute_query(state_db, "SELECT * FROM session")) == 1, "The earlier session should survive"
    restored = load_sender_state(state_db, secret)
    assert restored.buffer == sender.buffer, "The queued slots should be unchanged"


def test_state_file_directory_is_created(tmp_path):
    """Test that opening a state file in a missing directory creates the directory."""
    conn = open_state(tmp_path / "nested" / "state.db")
    conn.close()
    assert (tmp_path / "nested" / "state.db").exists(), "The state file should be created"


def test_non_database_file_is_refused(tmp_path):
    """Test that a file that is not SQLite raises a state-file error and is left untouched."""
    path = tmp_path / "state.db"
    content = b"plain text where a state file should be\n" * 32
    path.write_bytes(content)
    with pytest.raises(StateFileError):
        open_state(path)
    assert path.read_bytes() == content, "The file should not be modified"
