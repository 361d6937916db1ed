"""
Database schema for session-state files.
This module creates the tables a session-state file holds and checks their version.
"""
import sqlite3

from src.jigsaw.errors import StateMismatchError

SCHEMA_VERSION = 1


def create_tables(conn: sqlite3.Connection) -> None:
    """
    Create all session-state tables if they do not exist yet.

    Args:
        conn: SQLite connection
    """
    conn.execute(
        """
    CREATE TABLE IF NOT EXISTS schema_version (
        version INTEGER NOT NULL
    )
    """
    )

    # One row: the session this file belongs to
    conn.execute(
        """
    CREATE TABLE IF NOT EXISTS session (
        session_id INTEGER PRIMARY KEY CHECK (session_id = 1),
        role TEXT NOT NULL CHECK (role IN ('sender', 'receiver')),
        fingerprint TEXT NOT NULL,
        run_index INTEGER NOT NULL,
        next_seq INTEGER NOT NULL,
        tail BLOB NOT NULL DEFAULT x'',
        stream_bits INTEGER NOT NULL DEFAULT 0,
        stream_length INTEGER NOT NULL DEFAULT 0,
        updated_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
    )
    """
    )

    conn.execute(
        """
    CREATE TABLE IF NOT EXISTS pad_blocks (
        position INTEGER PRIMARY KEY,
        value BLOB NOT NULL
    )
    """
    )

    # Queued sender slots, pending receiver run blocks and open AONT group blocks
    conn.execute(
        """
    CREATE TABLE IF NOT EXISTS slots (
        kind TEXT NOT NULL CHECK (kind IN ('buffer', 'pending', 'group')),
        position INTEGER NOT NULL,
        flags INTEGER NOT NULL,
        block BLOB NOT NULL,
        plain BLOB,
        PRIMARY KEY (kind, position)
    )
    """
    )

    if conn.execute("SELECT COUNT(*) FROM schema_version").fetchone()[0] == 0:
        conn.execute("INSERT INTO schema_version (version) VALUES (?)", (SCHEMA_VERSION,))

    conn.commit()


def check_version(conn: sqlite3.Connection) -> None:
    """
    Refuse state files written with another schema version.

    Args:
        conn: SQLite connection
    """
    row = conn.execute("SELECT version FROM schema_version").fetchone()
    if row is None or row[0] != SCHEMA_VERSION:
        raise StateMismatchError(f"Unsupported session-state schema version: {row[0] if row else 'none'}")


def clear_tables(conn: sqlite3.Connection) -> None:
    """
    Remove all session rows, keeping the schema.

    Args:
        conn: SQLite connection
    """
    for table in ("slots", "pad_blocks", "session"):
        conn.execute(f"DELETE FROM {table}")  # nosec B608
