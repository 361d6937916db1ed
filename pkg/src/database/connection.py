"""
Database connection utilities for session-state files.
This module opens state databases, runs queries on them and wraps writes in a single transaction.
Every sqlite3 failure surfaces as a StateFileError.
"""
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from src.jigsaw.errors import StateFileError

# Seconds to wait on a state file locked by another invocation
LOCK_TIMEOUT = 5.0


@contextmanager
def state_errors(action: str) -> Iterator[None]:
    """Re-raise sqlite3 errors from the body as StateFileError."""
    try:
        yield
    except sqlite3.Error as e:
        raise StateFileError(f"{action} failed: {e}") from e


def get_connection(db_path: Optional[Union[str, Path]] = None) -> sqlite3.Connection:
    """
    Open a state database.

    Args:
        db_path: Path to the state file; None opens an in-memory database

    Returns:
        A SQLite connection returning `sqlite3.Row` rows

    Raises:
        StateFileError: If the file cannot be opened as a SQLite database
    """
    with state_errors(f"Opening state file {db_path or ':memory:'}"):
        if db_path is None:
            conn = sqlite3.connect(":memory:")
        else:
            path = Path(db_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            conn = sqlite3.connect(str(path), timeout=LOCK_TIMEOUT)

        conn.execute("PRAGMA foreign_keys = ON")
        conn.row_factory = sqlite3.Row
    return conn


@contextmanager
def transaction(conn: sqlite3.Connection, action: str) -> Iterator[sqlite3.Connection]:
    """
    Run the body as one transaction, committing on success.

    Args:
        conn: SQLite connection
        action: What the body does, used in the error message

    Raises:
        StateFileError: If any statement or the commit fails; nothing from the body is kept
    """
    try:
        conn.execute("BEGIN TRANSACTION")
        yield conn
        conn.commit()
    except sqlite3.Error as e:
        conn.rollback()
        raise StateFileError(f"{action} failed: {e}") from e
    except Exception:
        conn.rollback()
        raise


def execute_query(conn: sqlite3.Connection, query: str, params: tuple = ()) -> list:
    """
    Execute a SQL query and return the rows as dictionaries.

    Args:
        conn: SQLite connection
        query: SQL query string
        params: Query parameters

    Returns:
        List of rows as dictionaries
    """
    cursor = conn.execute(query, params)
    rows = cursor.fetchall()
    cursor.close()
    return [dict(row) for row in rows]
