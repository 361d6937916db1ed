"""
Session-state files.

A sender or receiver that handles one message per process invocation keeps its pad, sequence
counter and buffered blocks in a small SQLite file between runs. The file is bound to the
fingerprint of the keyfile and to the role that wrote it.
"""
import logging
import sqlite3
from concurrent.futures import Executor
from pathlib import Path
from typing import Optional, Union

from src.database.connection import execute_query, get_connection, state_errors, transaction
from src.database.schema import check_version, clear_tables, create_tables
from src.jigsaw.codec import ReceiverSession, SenderSession, Slot
from src.jigsaw.errors import StateMismatchError
from src.jigsaw.field import Block
from src.jigsaw.keymat import PadState, SharedSecret
from src.jigsaw.rng import RandomSource
from src.jigsaw.tear import EMPTY_PART, Part

logger = logging.getLogger(__name__)

SENDER = "sender"
RECEIVER = "receiver"


def open_state(db_path: Optional[Union[str, Path]] = None) -> sqlite3.Connection:
    """
    Open a session-state database, creating its tables when needed.

    Args:
        db_path: Path to the state file; None keeps the state in memory

    Returns:
        A SQLite connection

    Raises:
        StateFileError: If the file is not a readable state database
        StateMismatchError: If the file was written with another schema version
    """
    conn = get_connection(db_path)
    try:
        with state_errors(f"Opening state file {db_path}"):
            create_tables(conn)
            check_version(conn)
    except Exception:
        conn.close()
        raise
    return conn


def _session_row(conn: sqlite3.Connection, secret: SharedSecret, role: str) -> Optional[dict]:
    with state_errors("Reading session"):
        rows = execute_query(conn, "SELECT * FROM session WHERE session_id = 1")
    if not rows:
        return None
    row = rows[0]
    if row["role"] != role:
        raise StateMismatchError(f"State file belongs to a {row['role']}, not a {role}")
    if row["fingerprint"] != secret.fingerprint():
        raise StateMismatchError("State file was written under a different keyfile")
    return row


def _load_pad(conn: sqlite3.Connection, secret: SharedSecret, run_index: int) -> PadState:
    with state_errors("Reading pad blocks"):
        rows = execute_query(conn, "SELECT value FROM pad_blocks ORDER BY position")
    if len(rows) != secret.k:
        raise StateMismatchError(f"State file holds {len(rows)} pad blocks, expected {secret.k}")
    return PadState(tuple(Block.from_bytes(row["value"], secret.ps) for row in rows), run_index)


def _load_slots(conn: sqlite3.Connection, kind: str) -> list:
    with state_errors(f"Reading {kind} slots"):
        return execute_query(conn, "SELECT flags, block, plain FROM slots WHERE kind = ? ORDER BY position", (kind,))


def _write_session(
    conn: sqlite3.Connection,
    secret: SharedSecret,
    role: str,
    pad: PadState,
    next_seq: int,
    tail: bytes = b"",
    stream_pending: Part = EMPTY_PART,
) -> None:
    clear_tables(conn)
    conn.execute(
        "INSERT INTO session (session_id, role, fingerprint, run_index, next_seq, tail, stream_bits, stream_length) "
        "VALUES (1, ?, ?, ?, ?, ?, ?, ?)",
        (role, secret.fingerprint(), pad.run_index, next_seq, tail, stream_pending.bits, stream_pending.length),
    )
    conn.executemany(
        "INSERT INTO pad_blocks (position, value) VALUES (?, ?)",
        [(index, block.to_bytes()) for index, block in enumerate(pad.p)],
    )


def save_sender_state(conn: sqlite3.Connection, sender: SenderSession) -> None:
    """
    Persist a sender's pad, sequence counter, queued slots and full-block tail.

    Args:
        conn: State database connection
        sender: Session to save
    """
    with transaction(conn, "Saving sender state"):
        _write_session(conn, sender.secret, SENDER, sender.pad, sender.next_seq, tail=sender.tail)
        conn.executemany(
            "INSERT INTO slots (kind, position, flags, block, plain) VALUES ('buffer', ?, ?, ?, ?)",
            [(i, s.flags, s.block.to_bytes(), s.plain.to_bytes()) for i, s in enumerate(sender.buffer)],
        )
    logger.debug("Saved sender state at run %d, seq %d", sender.pad.run_index, sender.next_seq)


def load_sender_state(
    conn: sqlite3.Connection,
    secret: SharedSecret,
    rng: Optional[RandomSource] = None,
    executor: Optional[Executor] = None,
) -> SenderSession:
    """
    Resume a sender session, or start a fresh one if the file holds no session yet.

    Raises:
        StateMismatchError: If the file belongs to a receiver or another keyfile
    """
    row = _session_row(conn, secret, SENDER)
    if row is None:
        return SenderSession(secret, rng=rng, executor=executor)
    buffer = [
        Slot(
            r["flags"],
            Block.from_bytes(r["block"], secret.ps),
            Block.from_bytes(r["plain"] if r["plain"] is not None else r["block"], secret.ps),
        )
        for r in _load_slots(conn, "buffer")
    ]
    return SenderSession(
        secret,
        rng=rng,
        pad=_load_pad(conn, secret, row["run_index"]),
        next_seq=row["next_seq"],
        buffer=buffer,
        tail=bytes(row["tail"]),
        executor=executor,
    )


def save_receiver_state(conn: sqlite3.Connection, receiver: ReceiverSession) -> None:
    """
    Persist a receiver's pad, expected sequence number, partial run, open AONT group and
    dangling bits.

    Args:
        conn: State database connection
        receiver: Session to save
    """
    with transaction(conn, "Saving receiver state"):
        _write_session(
            conn,
            receiver.secret,
            RECEIVER,
            receiver.pad,
            receiver.expected_seq,
            stream_pending=receiver.stream_pending,
        )
        rows = [("pending", i, flags, block.to_bytes()) for i, (flags, block) in enumerate(receiver.pending)]
        rows += [("group", i, 0, block.to_bytes()) for i, block in enumerate(receiver.group)]
        conn.executemany("INSERT INTO slots (kind, position, flags, block) VALUES (?, ?, ?, ?)", rows)
    logger.debug("Saved receiver state at run %d, seq %d", receiver.pad.run_index, receiver.expected_seq)


def load_receiver_state(
    conn: sqlite3.Connection, secret: SharedSecret, executor: Optional[Executor] = None
) -> ReceiverSession:
    """
    Resume a receiver session, or start a fresh one if the file holds no session yet.

    Raises:
        StateMismatchError: If the file belongs to a sender or another keyfile
    """
    row = _session_row(conn, secret, RECEIVER)
    if row is None:
        return ReceiverSession(secret, executor=executor)
    return ReceiverSession(
        secret,
        pad=_load_pad(conn, secret, row["run_index"]),
        expected_seq=row["next_seq"],
        pending=[(r["flags"], Block.from_bytes(r["block"], secret.ps)) for r in _load_slots(conn, "pending")],
        group=[Block.from_bytes(r["block"], secret.ps) for r in _load_slots(conn, "group")],
        stream_pending=Part(row["stream_bits"], row["stream_length"]),
        executor=executor,
    )
