"""Per-client streaming detector.

Each client owns a FIFO memory of the last ``k`` query fingerprints. A new
query is fingerprinted, scored against that memory and flagged when the
weighted similarity strictly exceeds ``delta``. The query is then appended
to memory whether or not it was flagged.
"""

from __future__ import annotations

import logging
import math
import struct
import threading
import time
import zlib
from collections import deque
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .audio_io import AudioClip, add_noise_snr, rms
from .errors import ClientBlocked, CorruptSnapshot, VersionMismatch
from .fingerprint import Fingerprint, FingerprintConfig, extract
from .similarity import SimilarityBreakdown, aggregate, check_compatible, cosines_from_dots

log = logging.getLogger(__name__)

POLICIES = ("log", "warn", "block")
SNAPSHOT_MAGIC = b"QWST"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class DetectorConfig:
    k: int = 75
    delta: float = 1.0
    defense_noise_snr: float | None = None
    defense_noise_seed: int = 0
    action_policy: str = "log"
    block_duration: float = 60.0
    fingerprint: FingerprintConfig = field(default_factory=FingerprintConfig)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.action_policy not in POLICIES:
            raise ValueError(f"action_policy must be one of {POLICIES}")
        if self.block_duration < 0:
            raise ValueError("block_duration must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fingerprint"]["neighborhood"] = list(self.fingerprint.neighborhood)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        d = dict(d)
        if isinstance(d.get("fingerprint"), dict):
            d["fingerprint"] = FingerprintConfig.from_dict(d["fingerprint"])
        return cls(**d)

    def with_(self, **changes) -> "DetectorConfig":
        return replace(self, **changes)


@dataclass
class Verdict:
    client_id: str
    sequence_no: int
    breakdown: SimilarityBreakdown | None
    flagged: bool
    action: str  # none | warned | blocked
    timestamp: float

    @property
    def score(self) -> float | None:
        return None if self.breakdown is None else self.breakdown.score

    def to_dict(self) -> dict:
        return {
            "client_id": self.client_id,
            "sequence_no": self.sequence_no,
            "score": self.score,
            "flagged": self.flagged,
            "action": self.action,
            "timestamp": self.timestamp,
        }


class MemoryBuffer:
    """Ring of at most ``k`` (fingerprint, sequence number) entries.

    The counts also live in a k x D float matrix so scoring a query is one
    matrix-vector product instead of restacking the memory every time.
    """

    def __init__(self, k: int, entries=()):
        self.k = k
        self._entries: deque[tuple[Fingerprint, int]] = deque(maxlen=k)
        self._matrix: np.ndarray | None = None
        self._norms = np.zeros(k, dtype=np.int64)
        self._next = 0  # ring slot the next append overwrites
        for fp, seq in entries:
            self.append(fp, seq)

    def append(self, fp: Fingerprint, seq: int) -> None:
        if self._matrix is None:
            self._matrix = np.zeros((self.k, fp.dim))
        elif self._entries:
            check_compatible(fp, self._entries[0][0])
        self._matrix[self._next] = fp.counts
        self._norms[self._next] = fp.sq_norm
        self._next = (self._next + 1) % self.k
        self._entries.append((fp, seq))

    def components(self, fp: Fingerprint) -> np.ndarray:
        """Cosine of ``fp`` against every entry, oldest first."""
        n = len(self._entries)
        check_compatible(fp, self._entries[0][0])
        order = np.arange(self._next - n, self._next) % self.k
        if fp.sq_norm == 0:
            return np.zeros(n)
        dots = (self._matrix @ fp.counts.astype(np.float64))[order]
        return cosines_from_dots(dots, fp.sq_norm, self._norms[order])

    def fingerprints(self) -> list[Fingerprint]:
        return [fp for fp, _ in self._entries]

    def entries(self) -> list[tuple[Fingerprint, int]]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class ClientState:
    memory: MemoryBuffer
    last_seq: int = 0
    blocked_until: float | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


class _SharedExclusiveLock:
    """Many observers may run at once; a state restore runs alone."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def shared(self) -> Iterator[None]:
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                self._cond.notify_all()

    @contextmanager
    def exclusive(self) -> Iterator[None]:
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._writer = True
            while self._readers:
                self._cond.wait()
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


def defense_noise_seed(base_seed: int, counter: int) -> int:
    return int(np.random.SeedSequence([base_seed, counter]).generate_state(1)[0])


class Detector:
    def __init__(self, cfg: DetectorConfig = DetectorConfig(), clock: Callable[[], float] = time.time):
        self.cfg = cfg
        self.clock = clock
        self._clients: dict[str, ClientState] = {}
        self._registry = threading.Lock()
        self._state_lock = _SharedExclusiveLock()

    # -- configuration -------------------------------------------------

    @property
    def delta(self) -> float:
        return self.cfg.delta

    def set_delta(self, delta: float) -> None:
        self.cfg = self.cfg.with_(delta=float(delta))

    # -- query path ----------------------------------------------------

    def preprocess(self, clip: AudioClip, counter: int) -> AudioClip:
        """Apply defense noise, seeded by the client's query counter."""
        snr = self.cfg.defense_noise_snr
        if snr is None or rms(clip.samples) == 0.0:
            return clip
        return add_noise_snr(clip, snr, defense_noise_seed(self.cfg.defense_noise_seed, counter))

    def fingerprint(self, clip: AudioClip, counter: int) -> Fingerprint:
        return extract(self.preprocess(clip, counter), self.cfg.fingerprint)

    def _client(self, client_id: str) -> ClientState:
        with self._registry:
            state = self._clients.get(client_id)
            if state is None:
                state = ClientState(MemoryBuffer(self.cfg.k))
                self._clients[client_id] = state
            return state

    def _check_block(self, client_id: str, state: ClientState) -> None:
        if state.blocked_until is None:
            return
        now = self.clock()
        if now < state.blocked_until:
            raise ClientBlocked(client_id, state.blocked_until - now)
        state.blocked_until = None

    def observe(self, client_id: str, clip: AudioClip) -> Verdict:
        return self._observe(client_id, lambda seq: self.fingerprint(clip, seq))

    def observe_fingerprint(self, client_id: str, fp: Fingerprint) -> Verdict:
        """Score an already extracted fingerprint (defense noise is skipped)."""
        return self._observe(client_id, lambda seq: fp)

    def _observe(self, client_id: str, make_fp: Callable[[int], Fingerprint]) -> Verdict:
        with self._state_lock.shared():
            state = self._client(client_id)
            with state.lock:
                self._check_block(client_id, state)
                cfg = self.cfg
                seq = state.last_seq + 1
                fp = make_fp(seq)
                breakdown = aggregate(state.memory.components(fp), cfg.k) if len(state.memory) else None
                flagged = breakdown is not None and breakdown.score > cfg.delta
                state.memory.append(fp, seq)
                state.last_seq = seq
                now = self.clock()
                action = "none"
                if flagged:
                    if cfg.action_policy == "block":
                        state.blocked_until = now + cfg.block_duration
                        action = "blocked"
                    elif cfg.action_policy == "warn":
                        action = "warned"
                    log.info("client %s query %d flagged (s=%.4f > %.4f)", client_id, seq, breakdown.score, cfg.delta)
                return Verdict(client_id, seq, breakdown, flagged, action, now)

    # -- administration ------------------------------------------------

    def reset(self, client_id: str) -> None:
        with self._state_lock.shared():
            with self._registry:
                self._clients.pop(client_id, None)

    def clients(self) -> list[str]:
        with self._registry:
            return sorted(self._clients)

    def client_info(self, client_id: str) -> dict | None:
        with self._state_lock.shared():
            with self._registry:
                state = self._clients.get(client_id)
            if state is None:
                return None
            with state.lock:
                now = self.clock()
                blocked = state.blocked_until is not None and now < state.blocked_until
                return {
                    "client_id": client_id,
                    "memory_size": len(state.memory),
                    "sequence_no": state.last_seq,
                    "blocked": blocked,
                    "retry_after": (state.blocked_until - now) if blocked else 0.0,
                }

    # -- snapshots -----------------------------------------------------

    def snapshot(self) -> bytes:
        with self._state_lock.exclusive():
            return _encode_snapshot(self._clients)

    def load_snapshot(self, data: bytes) -> None:
        """Replace all client state with the content of ``data``."""
        clients = _decode_snapshot(data, self.cfg.k)
        with self._state_lock.exclusive():
            with self._registry:
                self._clients = clients

    @classmethod
    def restore(cls, data: bytes, cfg: DetectorConfig = DetectorConfig(),
                clock: Callable[[], float] = time.time) -> "Detector":
        det = cls(cfg, clock)
        det.load_snapshot(data)
        return det


# ------------------------------------------------------------ wire format
#
# "QWST" | u8 version | u32 client count | records... | u32 crc32(all before)
# record  = u32 length | u16 id length | id utf-8 | u64 last_seq
#           | f64 blocked_until (NaN = none) | u32 entries
#           | entries * (u64 seq | u32 fp length | QWFP bytes)


def _encode_snapshot(clients: dict[str, ClientState]) -> bytes:
    parts = [SNAPSHOT_MAGIC, struct.pack("<BI", SNAPSHOT_VERSION, len(clients))]
    for cid in sorted(clients):
        state = clients[cid]
        name = cid.encode("utf-8")
        until = math.nan if state.blocked_until is None else state.blocked_until
        entries = state.memory.entries()
        rec = [struct.pack("<H", len(name)), name, struct.pack("<QdI", state.last_seq, until, len(entries))]
        for fp, seq in entries:
            raw = fp.to_bytes()
            rec.append(struct.pack("<QI", seq, len(raw)))
            rec.append(raw)
        body = b"".join(rec)
        parts.append(struct.pack("<I", len(body)))
        parts.append(body)
    blob = b"".join(parts)
    return blob + struct.pack("<I", zlib.crc32(blob))


def _decode_snapshot(data: bytes, k: int) -> dict[str, ClientState]:
    if len(data) < 13 or data[:4] != SNAPSHOT_MAGIC:
        raise CorruptSnapshot("not a QWST snapshot")
    version = data[4]
    if version != SNAPSHOT_VERSION:
        raise VersionMismatch(f"snapshot version {version}, expected {SNAPSHOT_VERSION}")
    blob, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(blob) != crc:
        raise CorruptSnapshot("checksum mismatch")
    try:
        (count,) = struct.unpack_from("<I", blob, 5)
        pos = 9
        clients: dict[str, ClientState] = {}
        for _ in range(count):
            (length,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            rec, pos = blob[pos : pos + length], pos + length
            if len(rec) != length:
                raise CorruptSnapshot("truncated client record")
            (nlen,) = struct.unpack_from("<H", rec, 0)
            cid = rec[2 : 2 + nlen].decode("utf-8")
            off = 2 + nlen
            last_seq, until, n_entries = struct.unpack_from("<QdI", rec, off)
            off += struct.calcsize("<QdI")
            entries = []
            for _ in range(n_entries):
                seq, fplen = struct.unpack_from("<QI", rec, off)
                off += 12
                entries.append((Fingerprint.from_bytes(rec[off : off + fplen]), seq))
                off += fplen
            if off != len(rec):
                raise CorruptSnapshot("trailing bytes in client record")
            clients[cid] = ClientState(
                MemoryBuffer(k, entries),
                last_seq,
                None if math.isnan(until) else until,
            )
        if pos != len(blob):
            raise CorruptSnapshot("trailing bytes after last record")
    except (struct.error, UnicodeDecodeError) as exc:
        raise CorruptSnapshot(str(exc)) from exc
    return clients
