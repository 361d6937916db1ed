"""
Command-line interface for jigsaw transfers.

Packet-stream files stand in for the network: `send` turns a data file into a stream of
authenticated packets, `recv` turns one back into data.
"""
import io
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import click

from src.analysis.bench import PartPolicy, emit_csv
from src.database.state_store import (
    load_receiver_state,
    load_sender_state,
    open_state,
    save_receiver_state,
    save_sender_state,
)
from src.jigsaw.codec import FLAG_FLUSH, FLAG_GROUP_FINAL, FLAG_PADDING, ReceiverSession, SenderSession
from src.jigsaw.errors import AuthenticationError, ConfigurationError, JigsawError, ProtocolError
from src.jigsaw.field import ReductionPoly
from src.jigsaw.keymat import KEYFILE_MAGIC, Mode, SharedSecret, keygen, load_keyfile, save_keyfile
from src.jigsaw.mac import DEFAULT_HASH, MacConfig
from src.jigsaw.rng import RandomSource
from src.transport.simnet import ChannelConfig, attack_demo, run_transfer
from src.transport.wire import DEFAULT_WINDOW, STREAM_MAGIC, ReceivingEndpoint, packetize, read_stream, write_stream

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

EXIT_PARSE = 2
EXIT_AUTH = 3
EXIT_PROTOCOL = 4

NOTICE = (
    "Research artifact: this scheme has a published break (run differencing) and is not "
    "production cryptography. The default MAC hash, SHA-1, is deprecated."
)

MODE_NAMES = [mode.label for mode in Mode]


class CommandFailed(click.ClickException):
    """A library error reported with the exit code of its class."""

    def __init__(self, error: JigsawError):
        super().__init__(str(error))
        self.exit_code = exit_code_for(error)


def exit_code_for(error: JigsawError) -> int:
    if isinstance(error, AuthenticationError):
        return EXIT_AUTH
    if isinstance(error, ProtocolError):
        return EXIT_PROTOCOL
    return EXIT_PARSE


@contextmanager
def reported() -> Iterator[None]:
    try:
        yield
    except JigsawError as e:
        raise CommandFailed(e)


@contextmanager
def staged_write(path: Path, data: bytes) -> Iterator[None]:
    """
    Write `data` to a temporary file next to `path` and rename it into place once the body succeeds.

    State commits go in the body, so an output file never exists for a pad the state file does
    not hold.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        yield
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_atomic(path: Path, data: bytes) -> None:
    """Write `data` next to `path` and rename it into place."""
    with staged_write(path, data):
        pass


def _parse_seed(ctx, param, value: Optional[str]) -> Optional[int]:
    if value is None:
        return None
    try:
        return int(value, 16)
    except ValueError:
        raise click.BadParameter(f"{value!r} is not a hex string")


def _parse_k_range(ctx, param, value: str) -> List[int]:
    try:
        if ":" in value:
            low, high = (int(v) for v in value.split(":", 1))
            values = list(range(low, high + 1))
        else:
            values = [int(v) for v in value.split(",")]
    except ValueError:
        raise click.BadParameter(f"{value!r} is not a range a:b or a comma list")
    if not values or min(values) < 2:
        raise click.BadParameter("k values must be at least 2")
    return values


def _parse_sizes(ctx, param, value: str) -> List[int]:
    try:
        sizes = [int(v) for v in value.split(",")]
    except ValueError:
        raise click.BadParameter(f"{value!r} is not a comma list of bit counts")
    if any(size < 0 for size in sizes):
        raise click.BadParameter("Data sizes must be non-negative")
    return sizes


def parse_poly(text: str, ps: int) -> ReductionPoly:
    """
    Parse a polynomial given in hex, either with its leading x^PS bit or without it.

    Args:
        text: Hex coefficients, most significant first
        ps: Degree

    Returns:
        The reduction polynomial
    """
    try:
        value = int(text, 16)
    except ValueError:
        raise ConfigurationError(f"Polynomial {text!r} is not hex")
    if value.bit_length() == ps + 1:
        value ^= 1 << ps
    if value.bit_length() > ps:
        raise ConfigurationError(f"Polynomial {text} has degree above {ps}")
    return ReductionPoly(ps, value)


def _load_secret(path: str) -> SharedSecret:
    return load_keyfile(Path(path).read_bytes())


@click.group(help=f"Jigsaw secure data transfer.\n\n{NOTICE}")
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level")
def main(verbose: bool):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format=LOG_FORMAT)


@main.command("keygen")
@click.option("--ps", type=click.INT, default=1024, show_default=True, help="Block size in bits")
@click.option("--k", "k", type=click.INT, default=7, show_default=True, help="Pad blocks per run")
@click.option("--mode", type=click.Choice(MODE_NAMES), default="base", show_default=True)
@click.option("--min-part", type=click.INT, default=None, help="Minimum part size in bits")
@click.option("--poly", default=None, help="Reduction polynomial in hex")
@click.option("--seed", callback=_parse_seed, default=None, help="Hex seed for reproducible keys")
@click.option("--mac-from-block", type=click.INT, default=None, help="Take the MAC key from this pad block")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True)
def keygen_command(ps, k, mode, min_part, poly, seed, mac_from_block, out):
    """Generate a keyfile and print its fingerprint."""
    with reported():
        secret = keygen(
            ps,
            k,
            Mode.parse(mode),
            min_part_bits=min_part,
            rng=RandomSource(seed),
            poly=parse_poly(poly, ps) if poly else None,
            mac_from_block=mac_from_block,
        )
        write_atomic(Path(out), save_keyfile(secret))
    click.echo(secret.fingerprint())


@main.command("send")
@click.option("--key", type=click.Path(exists=True, dir_okay=False), envvar="JIGSAW_KEYFILE", required=True)
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--state", type=click.Path(dir_okay=False), envvar="JIGSAW_STATE", default=None)
@click.option("--seed", callback=_parse_seed, default=None, help="Hex seed for reproducible packets")
@click.option("--hold", is_flag=True, help="Keep the trailing partial run in the state instead of flushing")
@click.option("--parallel", is_flag=True, help="Mask the blocks of a run on a thread pool")
@click.option("--hash", "hash_name", default=DEFAULT_HASH, show_default=True)
@click.option("--tag-len", type=click.INT, default=None, help="Truncate tags to this many octets")
def send_command(key, in_path, out, state, seed, hold, parallel, hash_name, tag_len):
    """Turn a data file into a packet-stream file."""
    if hold and not state:
        raise click.UsageError("--hold needs --state to keep the buffered run")
    with reported():
        secret = _load_secret(key)
        mac = MacConfig(secret.mac_key, hash_name, tag_len)
        data = Path(in_path).read_bytes()
        executor = ThreadPoolExecutor(max_workers=secret.k) if parallel else None
        conn = open_state(state) if state else None
        try:
            rng = RandomSource(seed)
            if conn is not None:
                sender = load_sender_state(conn, secret, rng=rng, executor=executor)
            else:
                sender = SenderSession(secret, rng=rng, executor=executor)
            emissions = sender.push(data)
            if not hold:
                emissions += sender.flush()
            packets = packetize(emissions, mac)
            buffer = io.BytesIO()
            write_stream(buffer, packets, secret.ps, secret.k, mac.tag_len)
            with staged_write(Path(out), buffer.getvalue()):
                if conn is not None:
                    save_sender_state(conn, sender)
        finally:
            if conn is not None:
                conn.close()
            if executor is not None:
                executor.shutdown()
    logger.info("Sent %d octets as %d packets", len(data), len(packets))


@main.command("recv")
@click.option("--key", type=click.Path(exists=True, dir_okay=False), envvar="JIGSAW_KEYFILE", required=True)
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--state", type=click.Path(dir_okay=False), envvar="JIGSAW_STATE", default=None)
@click.option("--window", type=click.IntRange(min=1), default=DEFAULT_WINDOW, show_default=True)
@click.option("--hash", "hash_name", default=DEFAULT_HASH, show_default=True)
def recv_command(key, in_path, out, state, window, hash_name):
    """Recover a data file from a packet-stream file."""
    with reported():
        secret = _load_secret(key)
        header, packets = read_stream(in_path)
        if (header.ps, header.k) != (secret.ps, secret.k):
            raise ConfigurationError(
                f"Packet stream has PS={header.ps}, k={header.k}; keyfile has PS={secret.ps}, k={secret.k}"
            )
        mac = MacConfig(secret.mac_key, hash_name, header.tag_len)
        conn = open_state(state) if state else None
        try:
            receiver = load_receiver_state(conn, secret) if conn is not None else ReceiverSession(secret)
            data = _receive(receiver, mac, window, packets, resumable=conn is not None)
            with staged_write(Path(out), data):
                if conn is not None:
                    save_receiver_state(conn, receiver)
        finally:
            if conn is not None:
                conn.close()
    logger.info("Received %d octets from %d packets", len(data), len(packets))


def _receive(receiver: ReceiverSession, mac: MacConfig, window: int, packets: list, resumable: bool) -> bytes:
    endpoint = ReceivingEndpoint(receiver, mac, window)
    total = receiver.expected_seq + len(packets)
    out = bytearray()
    failure: Optional[ProtocolError] = None
    try:
        for packet in packets:
            out += endpoint.accept(packet)
        if resumable:
            endpoint.reorder.finish(total)
        else:
            endpoint.finish(total)
    except ProtocolError as e:
        failure = e
    # Authentication failures take precedence over the protocol errors they cause.
    if endpoint.rejected:
        for seq in endpoint.rejected:
            click.echo(f"MAC check failed for packet claiming seq {seq}", err=True)
        raise AuthenticationError(f"{len(endpoint.rejected)} packets failed MAC verification", len(endpoint.rejected))
    if failure is not None:
        raise failure
    return bytes(out)


@main.command("bench")
@click.option("--k", "k_values", callback=_parse_k_range, default="2:64", show_default=True)
@click.option("--sizes", callback=_parse_sizes, default="1024,10240,102400,1048576", show_default=True)
@click.option("--ps", type=click.INT, default=1024, show_default=True)
@click.option("--mode", type=click.Choice(MODE_NAMES), default="base", show_default=True)
@click.option("--policy", type=click.Choice([p.value for p in PartPolicy]), default="best", show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, allow_dash=True), default="-")
def bench_command(k_values, sizes, ps, mode, policy, csv_path):
    """Write closed-form operation counts as CSV."""
    if ps < 8 or ps % 8:
        raise click.BadParameter(f"PS must be a positive multiple of 8, got {ps}", param_hint="--ps")
    sink = io.StringIO()
    with reported():
        emit_csv(k_values, sizes, ps, sink, Mode.parse(mode), PartPolicy(policy))
    if csv_path == "-":
        click.echo(sink.getvalue(), nl=False)
    else:
        write_atomic(Path(csv_path), sink.getvalue().encode())


@main.command("attack-demo")
@click.option("--ps", type=click.INT, default=128, show_default=True)
@click.option("--k", "k", type=click.INT, default=7, show_default=True)
@click.option("--seed", callback=_parse_seed, default=None)
@click.option("--mode", type=click.Choice(["base", "aont"]), default=None, help="Default runs base, then aont")
@click.option("--runs", type=click.IntRange(min=2), default=4, show_default=True)
def attack_demo_command(ps, k, seed, mode, runs):
    """Run the run-differencing attack on a seeded transfer."""
    modes = [Mode.parse(mode)] if mode else [Mode.BASE, Mode.AONT]
    with reported():
        for index, selected in enumerate(modes):
            if index:
                click.echo()
            click.echo(attack_demo(ps, k, selected, seed=seed, runs=runs).to_text(), nl=False)


@main.command("simulate")
@click.option("--key", type=click.Path(exists=True, dir_okay=False), envvar="JIGSAW_KEYFILE", required=True)
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the delivered data here on success")
@click.option("--drop", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True)
@click.option("--duplicate", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True)
@click.option("--reorder", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True)
@click.option("--tamper", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True)
@click.option("--window", type=click.IntRange(min=1), default=DEFAULT_WINDOW, show_default=True)
@click.option("--seed", callback=_parse_seed, default=None, help="Hex seed for the sender and the channel")
def simulate_command(key, in_path, out, drop, duplicate, reorder, tamper, window, seed):
    """Send a data file through the simulated faulty channel and print the transcript."""
    with reported():
        secret = _load_secret(key)
        config = ChannelConfig(drop=drop, duplicate=duplicate, reorder=reorder, tamper=tamper, seed=seed)
        transcript = run_transfer(secret, Path(in_path).read_bytes(), config, window=window)
    click.echo(transcript.to_text(), nl=False)
    if transcript.rejected:
        raise click.exceptions.Exit(EXIT_AUTH)
    if transcript.error is not None:
        raise click.exceptions.Exit(exit_code_for(transcript.error))
    if out:
        write_atomic(Path(out), transcript.delivered)


@main.command("inspect")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def inspect_command(path):
    """Describe a keyfile or a packet-stream file without revealing key material."""
    head = Path(path).read_bytes()[:4]
    with reported():
        if head == KEYFILE_MAGIC:
            secret = _load_secret(path)
            lines = [
                "type: keyfile",
                f"mode: {secret.mode.label}",
                f"ps: {secret.ps}",
                f"k: {secret.k}",
                f"min_part_bits: {secret.min_part_bits}",
                f"mac_key_octets: {len(secret.mac_key)}",
                f"polynomial: {secret.poly}",
                f"fingerprint: {secret.fingerprint()}",
            ]
        elif head == STREAM_MAGIC:
            header, packets = read_stream(path)
            lines = [
                "type: packet-stream",
                f"ps: {header.ps}",
                f"k: {header.k}",
                f"tag_len: {header.tag_len}",
                f"packets: {header.count}",
            ]
            if packets:
                lines += [
                    f"seq: {packets[0].seq}..{packets[-1].seq}",
                    f"flush: {sum(1 for p in packets if p.flags & FLAG_FLUSH)}",
                    f"padding: {sum(1 for p in packets if p.flags & FLAG_PADDING)}",
                    f"group_final: {sum(1 for p in packets if p.flags & FLAG_GROUP_FINAL)}",
                ]
        else:
            raise ConfigurationError(f"{path} is neither a keyfile nor a packet stream")
    click.echo("\n".join(lines))


if __name__ == "__main__":
    main()
