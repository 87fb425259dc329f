"""Sliced error correction between an Alice and a Bob endpoint.

Bob drives the session; Alice only answers framed messages arriving on an
in-process duplex channel.  Every message is logged with the number of key
dependent bits it carries, which is what the leakage ledger adds up.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .channel import binary_entropy, make_rng
from .slicing import SliceSystem, pack_prior

A2B = "A>B"
B2A = "B>A"


class AccountingMode(str, Enum):
    BOTH_PARTIES = "both"
    MARKOV_BSC = "markov"


@dataclass(frozen=True)
class CascadeConfig:
    passes: int = 4
    k1_factor: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("Cascade needs at least one pass")

    def block_sizes(self, length: int, error_rate: float) -> list[int]:
        e = max(float(error_rate), 1e-12)
        k1 = min(max(1, math.ceil(self.k1_factor / e)), length)
        return [min(k1 << p, length) for p in range(self.passes)]


@dataclass(frozen=True)
class DiscloseAll:
    name = "all"


@dataclass(frozen=True)
class DiscloseNone:
    name = "none"


@dataclass(frozen=True)
class Cascade:
    config: CascadeConfig = field(default_factory=CascadeConfig)
    name = "cascade"


BcpKind = Union[DiscloseAll, DiscloseNone, Cascade]


def parse_bcp(spec: str, seed: int = 0, passes: int = 4) -> BcpKind:
    spec = spec.strip().lower()
    if spec == "all":
        return DiscloseAll()
    if spec == "none":
        return DiscloseNone()
    if spec == "cascade":
        return Cascade(CascadeConfig(passes=passes, seed=seed))
    raise ValueError(f"unknown BCP {spec!r}; expected all, none or cascade")


@dataclass(frozen=True)
class Message:
    slice: int
    pass_: int
    direction: str
    bits: int
    descriptor: dict
    payload: tuple = field(default=(), compare=False, repr=False)

    def record(self) -> dict:
        return {"slice": self.slice, "pass": self.pass_, "dir": self.direction, "bits": self.bits, "descriptor": self.descriptor}


@dataclass
class LeakageLedger:
    alice_bits: int = 0
    bob_bits: int = 0
    per_slice: dict = field(default_factory=dict)
    accounting_mode: AccountingMode = AccountingMode.BOTH_PARTIES

    def add(self, msg: Message) -> None:
        a, b = self.per_slice.get(msg.slice, (0, 0))
        if msg.direction == A2B:
            self.alice_bits += msg.bits
            self.per_slice[msg.slice] = (a + msg.bits, b)
        else:
            self.bob_bits += msg.bits
            self.per_slice[msg.slice] = (a, b + msg.bits)

    def total(self, mode: AccountingMode | None = None) -> int:
        mode = AccountingMode(mode or self.accounting_mode)
        if mode is AccountingMode.BOTH_PARTIES:
            return self.alice_bits + self.bob_bits
        # Bob's parities are a noisy function of Alice's: A -> RA -> RB.
        return self.alice_bits

    def slice_rows(self) -> list[tuple[int, int, int]]:
        return [(i, *self.per_slice[i]) for i in sorted(self.per_slice)]


@dataclass
class Transcript:
    messages: list = field(default_factory=list)
    ledger: LeakageLedger = field(default_factory=LeakageLedger)

    def log(self, msg: Message) -> None:
        self.messages.append(msg)
        self.ledger.add(msg)

    def summary(self) -> dict:
        return {
            "summary": True,
            "alice_bits": self.ledger.alice_bits,
            "bob_bits": self.ledger.bob_bits,
            "total_both": self.ledger.total(AccountingMode.BOTH_PARTIES),
            "total_markov": self.ledger.total(AccountingMode.MARKOV_BSC),
            "per_slice": [list(r) for r in self.ledger.slice_rows()],
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(m.record(), sort_keys=True) for m in self.messages]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"


class DuplexChannel:
    """Two FIFO queues, one per direction, logging everything sent."""

    def __init__(self, transcript: Transcript | None = None):
        self.transcript = transcript if transcript is not None else Transcript()
        self._queues = {A2B: deque(), B2A: deque()}

    def send(self, msg: Message) -> None:
        self.transcript.log(msg)
        self._queues[msg.direction].append(msg)

    def receive(self, direction: str) -> Message:
        return self._queues[direction].popleft()

    def pending(self, direction: str) -> int:
        return len(self._queues[direction])


def _shuffle(seed: int, slice_index: int, pass_index: int, length: int) -> np.ndarray:
    if pass_index == 0:
        return np.arange(length)
    return make_rng(seed, 1, slice_index, pass_index).permutation(length)


class AliceEndpoint:
    """Answers Bob's requests from Alice's slice strings."""

    def __init__(self, slice_bits: np.ndarray):
        self.slice_bits = slice_bits
        self._prefix = {}

    def _prefix_parity(self, d: dict) -> np.ndarray:
        key = (d["slice"], d["seed"], d["pass"])
        if key not in self._prefix:
            bits = self.slice_bits[d["slice"] - 1]
            perm = _shuffle(d["seed"], d["slice"], d["pass"], len(bits))
            self._prefix[key] = np.concatenate(([0], np.cumsum(bits[perm]) & 1)).astype(np.uint8)
        return self._prefix[key]

    def handle(self, msg: Message) -> Message:
        d = msg.descriptor
        kind = d["kind"]
        if kind == "disclose":
            bits = self.slice_bits[msg.slice - 1]
            return Message(msg.slice, msg.pass_, A2B, len(bits), {"kind": "slice_bits"}, tuple(bits.tolist()))
        pre = self._prefix_parity(d)
        if kind == "block_parities":
            k = d["block_size"]
            ends = np.minimum(np.arange(k, len(pre) - 1 + k, k), len(pre) - 1)
            starts = ends - np.diff(np.concatenate(([0], ends)))
            par = pre[ends] ^ pre[starts]
            return Message(msg.slice, msg.pass_, A2B, len(par), dict(d), tuple(par.tolist()))
        if kind == "parity":
            lo, hi = d["range"]
            return Message(msg.slice, msg.pass_, A2B, 1, dict(d), (int(pre[hi] ^ pre[lo]),))
        raise ValueError(f"unknown request {kind!r}")

    def serve(self, channel: DuplexChannel) -> None:
        while channel.pending(B2A):
            channel.send(self.handle(channel.receive(B2A)))


def _exchange(channel: DuplexChannel, alice: AliceEndpoint, msg: Message) -> Message:
    channel.send(msg)
    alice.serve(channel)
    return channel.receive(A2B)


def run_cascade(
    bob_bits: np.ndarray,
    config: CascadeConfig,
    channel: DuplexChannel,
    alice: AliceEndpoint,
    slice_index: int,
    error_rate: float,
    block_sizes: list[int] | None = None,
) -> np.ndarray:
    """Bob's side of Cascade; returns his corrected copy of the slice.

    Each pass splits a seeded shuffle of the positions into blocks and compares
    block parities.  Odd blocks are bisected down to one bit, and every flip
    re-opens the blocks holding that position in earlier passes.
    """
    bob = np.array(bob_bits, dtype=np.uint8)
    n = len(bob)
    sizes = block_sizes or config.block_sizes(n, error_rate)
    perms, pos = [], []
    odd: set[tuple[int, int]] = set()
    # Alice's parities already disclosed, keyed by (pass, lo, hi); never re-asked.
    disclosed: dict[tuple[int, int, int], int] = {}

    def alice_parity(p: int, lo: int, hi: int) -> int:
        key = (p, lo, hi)
        if key not in disclosed:
            d = {"kind": "parity", "slice": slice_index, "seed": config.seed, "pass": p, "block": lo // sizes[p], "range": [lo, hi]}
            mine = int(bob[perms[p][lo:hi]].sum() & 1)
            reply = _exchange(channel, alice, Message(slice_index, p + 1, B2A, 1, d, (mine,)))
            disclosed[key] = reply.payload[0]
        return disclosed[key]

    def flip(x: int) -> None:
        bob[x] ^= 1
        for q in range(len(perms)):
            blk = (q, int(pos[q][x]) // sizes[q])
            odd.symmetric_difference_update({blk})

    def bisect(p: int, b: int) -> None:
        lo, hi = b * sizes[p], min((b + 1) * sizes[p], n)
        while hi - lo > 1:
            mid = lo + (hi - lo + 1) // 2
            left = alice_parity(p, lo, mid)
            disclosed.setdefault((p, mid, hi), disclosed[(p, lo, hi)] ^ left)
            if left != int(bob[perms[p][lo:mid]].sum() & 1):
                hi = mid
            else:
                lo = mid
        flip(int(perms[p][lo]))

    for p, k in enumerate(sizes):
        perm = _shuffle(config.seed, slice_index, p, n)
        perms.append(perm)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n)
        pos.append(inv)
        nb = -(-n // k)
        padded = np.zeros(nb * k, dtype=np.int64)
        padded[:n] = bob[perm]
        mine = padded.reshape(nb, k).sum(axis=1) & 1
        d = {"kind": "block_parities", "slice": slice_index, "seed": config.seed, "pass": p, "block_size": k}
        reply = _exchange(channel, alice, Message(slice_index, p + 1, B2A, nb, d, tuple(mine.tolist())))
        theirs = np.asarray(reply.payload)
        for b, par in enumerate(reply.payload):
            disclosed[(p, b * k, min((b + 1) * k, n))] = par
        odd.update((p, int(b)) for b in np.nonzero(theirs != mine)[0])
        while odd:
            # Smallest blocks first: earliest pass, lowest index.
            q, b = min(odd)
            bisect(q, b)
    return bob


@dataclass
class SecResult:
    alice_key: np.ndarray
    bob_key: np.ndarray
    transcript: Transcript
    slice_mismatches: list

    @property
    def keys_equal(self) -> bool:
        return bool(np.array_equal(self.alice_key, self.bob_key))


def run_sec(
    system: SliceSystem,
    alice_values,
    bob_values,
    bcp_per_slice: list[BcpKind],
    accounting_mode: AccountingMode = AccountingMode.BOTH_PARTIES,
) -> SecResult:
    """Sliced error correction of ``alice_values`` against ``bob_values``.

    Keys are slice-major: all l bits of slice 1, then slice 2, and so on.
    Bob conditions each estimator on his corrected copies of earlier slices.
    """
    x = np.asarray(alice_values, dtype=float)
    xp = np.asarray(bob_values, dtype=float)
    if x.shape != xp.shape or x.ndim != 1 or len(x) < 1:
        raise ValueError("alice_values and bob_values must be equal-length 1-D sequences")
    if len(bcp_per_slice) != system.m:
        raise ValueError(f"need {system.m} BCP assignments, got {len(bcp_per_slice)}")
    transcript = Transcript(ledger=LeakageLedger(accounting_mode=AccountingMode(accounting_mode)))
    channel = DuplexChannel(transcript)
    alice = AliceEndpoint(system.design.slice_bits(x))
    corrected = []
    for i, (est, bcp) in enumerate(zip(system.estimators, bcp_per_slice), start=1):
        prior = pack_prior(np.array(corrected)) if corrected else np.zeros(len(x), dtype=np.int64)
        guess = est.decide(xp, prior).astype(np.uint8)
        if isinstance(bcp, DiscloseAll):
            reply = _exchange(channel, alice, Message(i, 0, B2A, 0, {"kind": "disclose", "slice": i}))
            guess = np.asarray(reply.payload, dtype=np.uint8)
        elif isinstance(bcp, Cascade):
            guess = run_cascade(guess, bcp.config, channel, alice, i, system.profile.e[i - 1])
        elif not isinstance(bcp, DiscloseNone):
            raise TypeError(f"unsupported BCP {bcp!r}")
        corrected.append(guess)
    alice_key = alice.slice_bits.reshape(-1)
    bob_key = np.concatenate(corrected)
    mism = [int(np.sum(alice.slice_bits[i] != corrected[i])) for i in range(system.m)]
    return SecResult(alice_key, bob_key, transcript, mism)


def practical_leakage(
    system: SliceSystem, l: int, bcp_per_slice: list[BcpKind], measured: Transcript, xi_hat: float | None = None
) -> dict:
    """Predicted |C_i| = min(l, f_i(l, e_i)) next to the measured transcript counts.

    The Cascade cost model is f = l (1 + xi) h(e) with xi measured on the
    Cascade slices of ``measured`` unless ``xi_hat`` is given.
    """
    rows = dict((i, (a, b)) for i, a, b in measured.ledger.slice_rows())
    xis = {}
    for i, bcp in enumerate(bcp_per_slice, start=1):
        h = binary_entropy(system.profile.e[i - 1])
        if isinstance(bcp, Cascade) and h > 0 and i in rows:
            xis[i] = rows[i][0] / (l * h) - 1.0
    if xi_hat is None:
        xi_hat = float(np.mean(list(xis.values()))) if xis else 0.0
    slices = []
    for i, bcp in enumerate(bcp_per_slice, start=1):
        e = system.profile.e[i - 1]
        h = binary_entropy(e)
        cascade_cost = l * (1.0 + xi_hat) * h
        if isinstance(bcp, DiscloseNone):
            predicted = 0.0
        elif isinstance(bcp, DiscloseAll):
            predicted = float(l)
        else:
            predicted = min(float(l), cascade_cost)
        a, b = rows.get(i, (0, 0))
        slices.append(
            {
                "slice": i,
                "bcp": bcp.name,
                "e": e,
                "h_e": h,
                "predicted_bits": predicted,
                "cascade_cost": cascade_cost,
                "recommended": "all" if cascade_cost >= l else "cascade",
                "alice_bits": a,
                "bob_bits": b,
                "xi": xis.get(i),
            }
        )
    return {
        "l": l,
        "xi_hat": xi_hat,
        "predicted_total": sum(s["predicted_bits"] for s in slices),
        "measured_both": measured.ledger.total(AccountingMode.BOTH_PARTIES),
        "measured_markov": measured.ledger.total(AccountingMode.MARKOV_BSC),
        "slices": slices,
    }
