"""File-based checkpointing for block-sequence columns.

One file per block column.  A human-readable header pins the job identity
(matrix digest, prime, block size, seed, column); after it, one fixed-width
decimal row per iteration, so a torn trailing write is detected by file
length alone and truncated away.  A small companion state file (atomically
replaced) carries the iteration vector so a resumed column does not recompute
completed matrix-vector products beyond the state cadence.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = "sela-checkpoint 1"


class CheckpointError(RuntimeError):
    pass


class CheckpointMismatch(CheckpointError):
    """Existing checkpoint belongs to a different job; refusing to resume."""


@dataclass(frozen=True)
class ColumnMeta:
    digest: int
    prime: int
    s: int
    seed: int
    column: int
    n: int
    symmetric: bool
    width: int

    def header_text(self) -> str:
        return (
            f"{MAGIC}\n"
            f"digest {self.digest:016x}\n"
            f"prime {self.prime}\n"
            f"s {self.s}\n"
            f"seed {self.seed}\n"
            f"column {self.column}\n"
            f"n {self.n}\n"
            f"symmetric {int(self.symmetric)}\n"
            f"width {self.width}\n"
            f"end-header\n"
        )


class CheckpointStore:
    """Directory of per-column sequence files plus iteration-state files."""

    ITER_WIDTH = 10

    def __init__(self, directory, state_every: int = 16):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.state_every = max(1, state_every)

    # -- paths ---------------------------------------------------------
    def column_path(self, column: int) -> Path:
        return self.directory / f"col_{column:05d}.seq"

    def state_path(self, column: int) -> Path:
        return self.directory / f"col_{column:05d}.state"

    def _value_width(self, prime: int) -> int:
        return len(str(prime - 1))

    def row_bytes(self, meta: ColumnMeta) -> int:
        return self.ITER_WIDTH + meta.width * (1 + self._value_width(meta.prime)) + 1

    # -- headers ---------------------------------------------------------
    def read_header(self, column: int) -> tuple[ColumnMeta, int]:
        """Parse header; returns (meta, header byte length)."""
        path = self.column_path(column)
        with open(path, "rb") as fh:
            first = fh.readline().decode("ascii", "replace").strip()
            if first != MAGIC:
                raise CheckpointError(f"{path}: bad magic {first!r}")
            fields = {}
            offset = len(first) + 1
            while True:
                line = fh.readline().decode("ascii", "replace")
                offset += len(line)
                line = line.strip()
                if line == "end-header":
                    break
                if not line:
                    raise CheckpointError(f"{path}: truncated header")
                key, _, value = line.partition(" ")
                fields[key] = value
        try:
            meta = ColumnMeta(
                digest=int(fields["digest"], 16),
                prime=int(fields["prime"]),
                s=int(fields["s"]),
                seed=int(fields["seed"]),
                column=int(fields["column"]),
                n=int(fields["n"]),
                symmetric=bool(int(fields["symmetric"])),
                width=int(fields["width"]),
            )
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"{path}: malformed header ({e})") from None
        return meta, offset

    def open_column(self, meta: ColumnMeta) -> int:
        """Create the column file or validate an existing header against
        `meta`; returns the count of complete rows already on disk."""
        path = self.column_path(meta.column)
        if not path.exists():
            with open(path, "wb") as fh:
                fh.write(meta.header_text().encode("ascii"))
            return 0
        existing, header_len = self.read_header(meta.column)
        if existing != meta:
            raise CheckpointMismatch(
                f"{path}: header {existing} does not match job {meta}"
            )
        return self._repair_and_count(path, header_len, self.row_bytes(meta))

    def _repair_and_count(self, path: Path, header_len: int, row_len: int) -> int:
        size = path.stat().st_size
        body = size - header_len
        full, torn = divmod(body, row_len)
        if torn:
            warnings.warn(
                f"{path}: truncating {torn} trailing bytes of an incomplete row"
            )
            with open(path, "rb+") as fh:
                fh.truncate(header_len + full * row_len)
        return int(full)

    def completed_rows(self, column: int) -> int:
        """Complete rows on disk (0 if the column file does not exist)."""
        path = self.column_path(column)
        if not path.exists():
            return 0
        meta, header_len = self.read_header(column)
        return self._repair_and_count(path, header_len, self.row_bytes(meta))

    # -- rows ------------------------------------------------------------
    def format_row(self, meta: ColumnMeta, iteration: int, values) -> bytes:
        vw = self._value_width(meta.prime)
        parts = [f"{iteration:0{self.ITER_WIDTH}d}"]
        parts.extend(f"{int(v):0{vw}d}" for v in values)
        return (" ".join(parts) + "\n").encode("ascii")

    def append_rows(self, meta: ColumnMeta, rows: list[bytes]) -> None:
        with open(self.column_path(meta.column), "ab") as fh:
            fh.write(b"".join(rows))

    def read_rows(self, column: int, expected_rows: int) -> np.ndarray:
        """(rows, width) int64 array; validates contiguous iteration indices."""
        meta, header_len = self.read_header(column)
        row_len = self.row_bytes(meta)
        with open(self.column_path(column), "rb") as fh:
            fh.seek(header_len)
            body = fh.read(expected_rows * row_len)
        if len(body) < expected_rows * row_len:
            raise CheckpointError(
                f"column {column}: wanted {expected_rows} rows, file holds fewer"
            )
        tokens = body.decode("ascii").split()
        per = meta.width + 1
        arr = np.array(tokens, dtype=np.int64).reshape(expected_rows, per)
        iters = arr[:, 0]
        if not np.array_equal(iters, np.arange(expected_rows)):
            raise CheckpointError(f"column {column}: iteration indices not contiguous")
        return arr[:, 1:]

    # -- vector state ------------------------------------------------------
    def write_state(self, column: int, iteration: int, vector: np.ndarray) -> None:
        path = self.state_path(column)
        tmp = path.with_suffix(".state.tmp")
        with open(tmp, "w") as fh:
            fh.write(f"iteration {iteration}\n")
            fh.write(" ".join(str(int(x)) for x in vector))
            fh.write("\n")
        os.replace(tmp, path)

    def read_state(self, column: int):
        """(iteration, vector) or None when absent/unreadable."""
        path = self.state_path(column)
        if not path.exists():
            return None
        try:
            with open(path) as fh:
                head = fh.readline().split()
                if len(head) != 2 or head[0] != "iteration":
                    return None
                iteration = int(head[1])
                vector = np.array(fh.readline().split(), dtype=np.int64)
            return iteration, vector
        except (ValueError, OSError):
            return None

    def clear(self) -> None:
        for path in self.directory.glob("col_*"):
            path.unlink()
