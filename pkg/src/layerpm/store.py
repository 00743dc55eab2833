"""Persistent install state, external-resolution lockfile, artifact cache.

State directory layout:

    <dir>/state.txt   one `<name> <manifest-hash> <built-at>` line per
                      built package, sorted, under a digest header line
    <dir>/lock.txt    one `external <name> <source> <provenance>` line per
                      recorded external resolution, sorted
    <dir>/cache/<manifest-hash>/   per-package artifact directory
    <dir>/.lock       flock guard: at most one executor per state dir

All writes are atomic (temp file + rename in the same directory), so a
crash at any point leaves the previous file intact. Timestamps are
informational and excluded from the integrity digest.
"""

from __future__ import annotations

import fcntl
import hashlib
import os
import re
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from collections.abc import Iterator, Mapping
from pathlib import Path

from layerpm.errors import StateCorruptError, StateLockedError
from layerpm.pkgmap import PKG_NAME_RE

STATE_FILE = "state.txt"
LOCKFILE_NAME = "lock.txt"
GUARD_FILE = ".lock"
CACHE_DIR = "cache"

_STATE_HEADER = "# layerpm-state "
HEX64_RE = re.compile(r"[0-9a-f]{64}\Z")


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def atomic_write_text(path: Path, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        os.write(fd, text.encode("utf-8"))
        os.fsync(fd)
        os.close(fd)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.close(fd)
        except OSError:
            pass
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


@dataclass(frozen=True)
class StateEntry:
    manifest_hash: str
    built_at: str


class InstallState:
    """Record of built packages keyed by manifest hash; optionally bound to
    a state directory (unbound states live only in memory, for tests)."""

    def __init__(
        self,
        entries: Mapping[str, StateEntry] | None = None,
        directory: Path | str | None = None,
    ):
        self.entries: dict[str, StateEntry] = dict(entries or {})
        self.directory = Path(directory) if directory is not None else None

    @property
    def state_digest(self) -> str:
        return _entries_digest(self.entries)

    def hash_of(self, name: str) -> str | None:
        entry = self.entries.get(name)
        return entry.manifest_hash if entry else None

    def verify(self) -> None:
        for name, entry in self.entries.items():
            if PKG_NAME_RE.match(name) is None:
                raise StateCorruptError(f"state entry has malformed package name '{name}'")
            if HEX64_RE.match(entry.manifest_hash) is None:
                raise StateCorruptError(f"state entry for '{name}' has malformed hash")


def _entries_digest(entries: Mapping[str, StateEntry]) -> str:
    text = "".join(f"{name} {entries[name].manifest_hash}\n" for name in sorted(entries))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def render_state(state: InstallState) -> str:
    lines = [_STATE_HEADER + state.state_digest]
    lines += [
        f"{name} {entry.manifest_hash} {entry.built_at}"
        for name, entry in sorted(state.entries.items())
    ]
    return "".join(line + "\n" for line in lines)


def load_state(directory: Path | str) -> InstallState:
    """Missing file means an empty state; a present file must pass the
    integrity check (digest header and well-formed, sorted entries)."""
    directory = Path(directory)
    path = directory / STATE_FILE
    if not path.exists():
        return InstallState(directory=directory)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(_STATE_HEADER):
        raise StateCorruptError(f"{path}: missing state digest header")
    recorded = lines[0][len(_STATE_HEADER):].strip()
    entries: dict[str, StateEntry] = {}
    previous = ""
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != 3:
            raise StateCorruptError(f"{path}:{lineno}: malformed state line")
        name, manifest_hash, built_at = parts
        if PKG_NAME_RE.match(name) is None or HEX64_RE.match(manifest_hash) is None:
            raise StateCorruptError(f"{path}:{lineno}: malformed state line")
        if name <= previous:
            raise StateCorruptError(f"{path}:{lineno}: entries out of order")
        previous = name
        entries[name] = StateEntry(manifest_hash, built_at)
    if _entries_digest(entries) != recorded:
        raise StateCorruptError(f"{path}: state digest mismatch")
    return InstallState(entries, directory=directory)


def record_built(state: InstallState, name: str, manifest_hash: str) -> InstallState:
    """Upsert one entry and (for directory-bound states) atomically rewrite
    the state file before returning."""
    if HEX64_RE.match(manifest_hash) is None:
        raise ValueError(f"not a lowercase hex64 hash: '{manifest_hash}'")
    if PKG_NAME_RE.match(name) is None:
        raise ValueError(f"malformed package name: '{name}'")
    state.entries[name] = StateEntry(manifest_hash, _now())
    if state.directory is not None:
        atomic_write_text(state.directory / STATE_FILE, render_state(state))
    return state


def cache_dir(directory: Path | str, manifest_hash: str) -> Path:
    return Path(directory) / CACHE_DIR / manifest_hash


# ---------------------------------------------------------------------------
# lockfile of external resolutions

@dataclass(frozen=True)
class Lockfile:
    """How each external was satisfied; `missing` is never persisted."""

    resolutions: Mapping[str, tuple[str, str]]  # name -> (source, provenance)

    def merged_with(self, updates: Mapping[str, tuple[str, str]]) -> "Lockfile":
        merged = dict(self.resolutions)
        merged.update(updates)
        return Lockfile(merged)


def render_lockfile(lock: Lockfile) -> str:
    lines = []
    for name in sorted(lock.resolutions):
        source, provenance = lock.resolutions[name]
        lines.append(f"external {name} {source} {provenance}".rstrip())
    return "".join(line + "\n" for line in lines)


def read_lockfile(directory: Path | str) -> Lockfile:
    path = Path(directory) / LOCKFILE_NAME
    if not path.exists():
        return Lockfile({})
    resolutions: dict[str, tuple[str, str]] = {}
    previous = ""
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        parts = line.split(" ", 3)
        if len(parts) < 3 or parts[0] != "external":
            raise StateCorruptError(f"{path}:{lineno}: malformed lockfile line")
        name, source = parts[1], parts[2]
        provenance = parts[3] if len(parts) == 4 else ""
        if source not in ("system", "builtin"):
            raise StateCorruptError(f"{path}:{lineno}: invalid lock source '{source}'")
        if name <= previous:
            raise StateCorruptError(f"{path}:{lineno}: lockfile entries out of order")
        previous = name
        resolutions[name] = (source, provenance)
    return Lockfile(resolutions)


def write_lockfile(directory: Path | str, lock: Lockfile) -> None:
    for name, (source, _) in lock.resolutions.items():
        if source not in ("system", "builtin"):
            raise ValueError(f"refusing to persist '{source}' resolution for external '{name}'")
    atomic_write_text(Path(directory) / LOCKFILE_NAME, render_lockfile(lock))


# ---------------------------------------------------------------------------
# executor guard

@contextmanager
def state_guard(directory: Path | str) -> Iterator[None]:
    """Exclusive flock over the state directory; raises StateLockedError if
    another executor holds it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fd = os.open(directory / GUARD_FILE, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            raise StateLockedError(f"another executor holds the lock on {directory}") from None
        yield
    finally:
        os.close(fd)
