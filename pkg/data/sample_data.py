"""
Sample data generation for jigsaw transfers.

This module writes a small corpus of Faker-generated messages and a seeded demo keyfile,
so the CLI can be tried end to end without preparing inputs by hand.
"""
from pathlib import Path
from typing import List, Union

from faker import Faker

from src.jigsaw.keymat import Mode, keygen, save_keyfile
from src.jigsaw.rng import RandomSource

# Initialize Faker with a consistent seed for reproducibility
fake = Faker()
Faker.seed(42)

DEMO_SEED = 42
DEMO_PS = 128
DEMO_K = 7


def generate_messages(count: int = 5) -> List[bytes]:
    """
    Generate text messages of varied length.

    Every third message is a short note, the rest are multi-paragraph letters.

    Args:
        count: Number of messages

    Returns:
        UTF-8 encoded messages
    """
    messages = []
    for i in range(count):
        if i % 3 == 2:
            text = fake.sentence()
        else:
            text = f"To: {fake.name()} <{fake.email()}>\nSubject: {fake.catch_phrase()}\n\n"
            text += "\n\n".join(fake.paragraphs(nb=fake.random_int(min=1, max=4)))
        messages.append(text.encode("utf-8"))
    return messages


def generate_binary_payload(size: int) -> bytes:
    """Generate `size` random octets."""
    return fake.binary(length=size)


def generate_demo_keyfile(mode: Mode = Mode.BASE, ps: int = DEMO_PS, k: int = DEMO_K) -> bytes:
    """
    Generate a keyfile from a fixed seed.

    Args:
        mode: Part layout mode
        ps: Block size in bits
        k: Pad blocks per run

    Returns:
        The keyfile octets
    """
    return save_keyfile(keygen(ps, k, mode, rng=RandomSource(DEMO_SEED)))


def generate_sample_data(directory: Union[str, Path], message_count: int = 5) -> List[Path]:
    """
    Write a demo keyfile and a message corpus into `directory`.

    Args:
        directory: Output directory, created if needed
        message_count: Number of text messages

    Returns:
        Paths of the written message files
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "demo.jsaw").write_bytes(generate_demo_keyfile())

    paths = []
    for index, message in enumerate(generate_messages(message_count), start=1):
        path = directory / f"message_{index:02d}.txt"
        path.write_bytes(message)
        paths.append(path)
    binary = directory / "payload.bin"
    binary.write_bytes(generate_binary_payload(4096))
    paths.append(binary)

    print(f"Sample data generated successfully in {directory}")
    print(f"Created {len(paths)} messages and demo.jsaw")
    return paths


if __name__ == "__main__":
    # If run directly, generate sample data
    generate_sample_data(Path(__file__).parent / "samples")
