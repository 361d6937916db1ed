"""
PyTest configuration and fixtures for jigsaw testing.
"""
import sqlite3
from typing import Generator

import pytest
from faker import Faker

from src.database.state_store import open_state
from src.jigsaw.keymat import Mode, SharedSecret, save_keyfile
from src.jigsaw.mac import MacConfig
from tests.secret_helper import make_secret

pytest_plugins = ["tests.pytest_jigsaw"]


@pytest.fixture(scope="session")
def fake() -> Faker:
    """Faker instance seeded for reproducible payloads."""
    instance = Faker()
    Faker.seed(42)
    return instance


@pytest.fixture(scope="function")
def payload(fake) -> bytes:
    """A random binary message of a few hundred octets."""
    return fake.binary(length=fake.random_int(min=100, max=600))


@pytest.fixture(scope="function")
def text_message(fake) -> bytes:
    """A short multi-paragraph text message."""
    return "\n\n".join(fake.paragraphs(nb=3)).encode("utf-8")


@pytest.fixture(scope="function")
def secret() -> SharedSecret:
    """Base-mode secret with PS=64 and k=5."""
    return make_secret()


@pytest.fixture(scope="function", params=[Mode.BASE, Mode.FULL_BLOCK, Mode.AONT], ids=lambda m: m.label)
def mode_secret(request) -> SharedSecret:
    """PS=64, k=5 secret in each mode."""
    return make_secret(mode=request.param)


@pytest.fixture(scope="function")
def mac(secret) -> MacConfig:
    """HMAC-SHA-1 configuration under the secret's MAC key."""
    return MacConfig(secret.mac_key)


@pytest.fixture(scope="function")
def keyfile(tmp_path, secret):
    """The base-mode secret written to a keyfile."""
    path = tmp_path / "key.jsaw"
    path.write_bytes(save_keyfile(secret))
    return path


@pytest.fixture(scope="function")
def state_db() -> Generator[sqlite3.Connection, None, None]:
    """
    Create an in-memory session-state database for testing.
    This fixture provides a fresh database for each test function.
    """
    conn = open_state()

    yield conn

    # Close connection after test
    conn.close()
