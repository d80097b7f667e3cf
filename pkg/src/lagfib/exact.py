"""Exact evaluation of a_k(n) = a_k(n-1) + a_k(n // k), a_k(0) = 1.

The recurrence only ever looks back to index ``n // k``, so a run that ends
at ``target`` keeps the values for indices ``0 .. ceil(target / k)`` and
carries everything above that as a single running value plus the prefix sum
``sum_{j < n} a_k(j)``.  The prefix sum gives ``a_k(kn)`` for free through
``a_k(kn) = a_k(n) + k * sum_{j < n} a_k(j)``.

Two storage modes share one interface:

* exact: a Python list of ints, advanced one index at a time;
* residue: a ``uint32`` matrix with one row per prime modulus below 2**32,
  advanced in vectorised blocks.  Inside a block ``[L, R)`` with ``R <= kL``
  every look-back index is already known, so the block is a cumulative sum of
  gathered stored values.  Values are recovered with the Chinese remainder
  theorem only where they are needed.
"""

from __future__ import annotations

import json
import logging
import math
import os
import struct
import tempfile
import zlib
from functools import lru_cache
from pathlib import Path

import mpmath
import numpy as np

from .context import (
    DEFAULT_CONTEXT,
    DomainError,
    InconsistentResidues,
    MemoryBudgetExceeded,
    PrecisionContext,
)

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 3 * 2**30
MEMORY_BUDGET_ENV = "LAGFIB_MEMORY_BUDGET"

CHECKPOINT_MAGIC = b"LFIBWIN\x00"
CHECKPOINT_VERSION = 1

_BLOCK = 1 << 20


def memory_budget(override: int | None = None) -> int:
    if override is not None:
        return int(override)
    env = os.environ.get(MEMORY_BUDGET_ENV)
    return int(float(env)) if env else DEFAULT_MEMORY_BUDGET


def _check_k(k: int) -> None:
    if int(k) != k or k < 2:
        raise DomainError(f"k must be an integer >= 2, got {k!r}")


# -- magnitude estimates ----------------------------------------------------


def log_size_estimate(k: int, n: int) -> float:
    """Estimate of ln a_k(n) from the non-oscillating de Bruijn terms.

    Exact for n < 4096 (computed directly); accurate to well under one nat
    above that.
    """
    if n < 4096:
        return math.log(_small_a(k, n))
    L = math.log(n)
    LL = math.log(L)
    lk = math.log(k)
    llk = math.log(lk)
    return (
        (L - LL) ** 2 / (2 * lk)
        + (0.5 + 1 / lk + llk / lk) * L
        - (1 + llk / lk) * LL
        + (1 + llk / (2 * lk)) * llk
        - 0.5 * math.log(2 * math.pi)
    )


@lru_cache(maxsize=64)
def _small_a(k: int, n: int) -> int:
    a = [1] * (n + 1)
    for i in range(1, n + 1):
        a[i] = a[i - 1] + a[i // k]
    return a[n]


def _is_prime(n: int) -> bool:
    # deterministic Miller-Rabin for n < 3.4e14
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_below(bound: int, count: int) -> list[int]:
    """The ``count`` largest primes strictly below ``bound``."""
    out = []
    p = bound - 1
    while len(out) < count:
        if _is_prime(p):
            out.append(p)
        p -= 1
    return out


def plan_moduli(k: int, n: int, *, with_prefix: bool = True, margin: float = 4.0) -> list[int]:
    """Choose word-sized primes whose product exceeds twice the largest value.

    The largest value is ``a_k(kn)`` when prefix sums are needed, otherwise
    ``a_k(n)``.  Its size is taken from ``log_size_estimate`` times ``margin``,
    plus one spare prime.
    """
    top = k * n if with_prefix else n
    need = log_size_estimate(k, max(top, 1)) + math.log(2 * margin)
    count = math.ceil(need / (32 * math.log(2))) + 1
    moduli = primes_below(2**32, count)
    log.info(
        "modulus plan for k=%d n=%d: %d primes (%.0f bits for an estimated %.0f-bit value)",
        k, n, count, sum(math.log2(m) for m in moduli), need / math.log(2),
    )
    return moduli


# -- Chinese remainder theorem ------------------------------------------------


def crt_reconstruct(residues, moduli) -> int:
    """Smallest nonnegative x with x = r_i (mod m_i) for all i."""
    residues = [int(r) for r in residues]
    moduli = [int(m) for m in moduli]
    if len(residues) != len(moduli) or not moduli:
        raise ValueError("need one residue per modulus")
    x, m = 0, 1
    for r, mi in zip(residues, moduli):
        if mi < 1:
            raise ValueError(f"invalid modulus {mi}")
        g = math.gcd(m, mi)
        if (r - x) % g:
            raise InconsistentResidues(f"{r} mod {mi} contradicts {x} mod {m}")
        lcm = m // g * mi
        step = (r - x) // g * pow(m // g, -1, mi // g) % (mi // g) if mi // g > 1 else 0
        x = (x + m * step) % lcm
        m = lcm
    return x


class _CRTBasis:
    """Precomputed Garner-free basis for repeated reconstruction."""

    def __init__(self, moduli):
        self.moduli = [int(m) for m in moduli]
        self.product = math.prod(self.moduli)
        self.basis = []
        for m in self.moduli:
            rest = self.product // m
            self.basis.append(rest * pow(rest, -1, m))

    def __call__(self, residues) -> int:
        return sum(int(r) * b for r, b in zip(residues, self.basis)) % self.product


# -- streaming window -------------------------------------------------------


class SequenceWindow:
    """Streaming state of the recurrence for one ``k``.

    ``capacity`` is the final index the window is planned for; values are
    stored for indices ``0 .. ceil(capacity / k)``.  ``upto`` is the index of
    the current value, ``prefix`` holds ``sum_{j < upto} a_k(j)``.

    With ``moduli=None`` values are exact Python ints; otherwise every stored
    value, ``current`` and ``prefix`` are residue vectors over ``moduli``.
    """

    def __init__(self, k: int, capacity: int, moduli=None, *, memory_budget_bytes: int | None = None):
        _check_k(k)
        if capacity < 0:
            raise DomainError("capacity must be nonnegative")
        self.k = int(k)
        self.capacity = int(capacity)
        self.stored_limit = -(-self.capacity // self.k)
        self.moduli = None if moduli is None else [int(m) for m in moduli]
        budget = memory_budget(memory_budget_bytes)
        need = self.estimate_bytes(self.k, self.capacity, self.moduli)
        if need > budget:
            raise MemoryBudgetExceeded(need, budget)
        self.upto = 0
        if self.moduli is None:
            self._store = [1]
            self.current = 1
            self.prefix = 0
        else:
            if len(set(self.moduli)) != len(self.moduli) or any(m >= 2**32 or m < 2 for m in self.moduli):
                raise ValueError("moduli must be distinct and below 2**32")
            self._mods = np.array(self.moduli, dtype=np.uint64)
            self._store = np.zeros((len(self.moduli), self.stored_limit + 1), dtype=np.uint32)
            self._store[:, 0] = 1
            self.current = np.ones(len(self.moduli), dtype=np.uint64)
            self.prefix = np.zeros(len(self.moduli), dtype=np.uint64)
            self._crt = _CRTBasis(self.moduli)

    @staticmethod
    def estimate_bytes(k: int, capacity: int, moduli=None) -> int:
        count = -(-capacity // k) + 1
        if moduli is not None:
            return count * 4 * len(moduli) + 8 * len(moduli) * _BLOCK * 3
        # CPython int: 28-byte header plus 4 bytes per 30-bit digit, plus the list slot
        bits = log_size_estimate(k, max(capacity // k, 1)) / math.log(2)
        return count * (28 + 4 * math.ceil(bits / 30) + 8)

    @property
    def exact(self) -> bool:
        return self.moduli is None

    def value(self, j: int):
        """Stored value at index ``j`` (int or residue vector)."""
        if j == self.upto:
            return self.current if self.exact else self.current.copy()
        if j > self.upto or j > self.stored_limit:
            raise IndexError(f"index {j} is not held by the window")
        return self._store[j] if self.exact else self._store[:, j].astype(np.uint64)

    def to_int(self, residues) -> int:
        return int(residues) if self.exact else self._crt(residues)

    def advance(self, target: int, *, record=(), checkpoint_path=None, checkpoint_every: int | None = None) -> dict:
        """Advance to index ``target`` and return ``{j: value}`` for each
        ``j`` in ``record`` with ``upto < j <= target``.

        If ``checkpoint_path`` is given the window is saved every
        ``checkpoint_every`` indices and once more at the end.
        """
        if target > self.capacity:
            raise DomainError(f"target {target} beyond the planned capacity {self.capacity}")
        wanted = sorted({int(j) for j in record if self.upto < j <= target})
        out = {}
        step = checkpoint_every if checkpoint_path is not None and checkpoint_every else None
        while self.upto < target:
            stop = min(target, self.upto + step) if step else target
            if self.exact:
                self._advance_exact(stop, wanted, out)
            else:
                self._advance_residue(stop, wanted, out)
            if checkpoint_path is not None:
                self.save(checkpoint_path)
        return out

    def _advance_exact(self, stop, wanted, out):
        k = self.k
        store = self._store
        limit = self.stored_limit
        cur = self.current
        pre = self.prefix
        marks = iter(w for w in wanted if self.upto < w <= stop)
        mark = next(marks, None)
        for n in range(self.upto + 1, stop + 1):
            pre += cur
            cur += store[n // k]
            if n <= limit:
                store.append(cur)
            if n == mark:
                out[n] = cur
                mark = next(marks, None)
        self.current, self.prefix, self.upto = cur, pre, stop

    def _advance_residue(self, stop, wanted, out):
        k = self.k
        mods = self._mods[:, None]
        limit = self.stored_limit
        wanted = np.array([w for w in wanted if self.upto < w <= stop], dtype=np.int64)
        while self.upto < stop:
            lo = self.upto + 1
            hi = min(stop + 1, lo + _BLOCK, k * lo)
            idx = np.arange(lo, hi, dtype=np.int64) // k
            block = self._store[:, idx].astype(np.uint64)
            np.cumsum(block, axis=1, out=block)
            block += self.current[:, None]
            block %= mods
            # prefix over indices upto .. hi-2
            tail = block[:, :-1].sum(axis=1, dtype=np.uint64) % self._mods
            self.prefix = (self.prefix + self.current + tail) % self._mods
            if lo <= limit:
                top = min(hi, limit + 1)
                self._store[:, lo:top] = block[:, : top - lo]
            if wanted.size:
                sel = wanted[(wanted >= lo) & (wanted < hi)]
                for j in sel:
                    out[int(j)] = block[:, j - lo].copy()
            self.current = block[:, -1].copy()
            self.upto = hi - 1

    # -- checkpoints --------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Serialise to the checkpoint format (see ``save``)."""
        held = min(self.upto, self.stored_limit) + 1
        if self.exact:
            chunks = [_pack_int(v) for v in self._store[:held]]
            chunks += [_pack_int(self.current), _pack_int(self.prefix)]
            payload = b"".join(chunks)
        else:
            payload = (
                np.ascontiguousarray(self._store[:, :held]).astype("<u4").tobytes()
                + self.current.astype("<u4").tobytes()
                + self.prefix.astype("<u4").tobytes()
            )
        header = {
            "k": self.k,
            "upto": self.upto,
            "capacity": self.capacity,
            "held": held,
            "mode": "exact" if self.exact else "residue",
            "moduli": self.moduli,
            "crc32": zlib.crc32(payload),
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return CHECKPOINT_MAGIC + struct.pack("<HI", CHECKPOINT_VERSION, len(head)) + head + payload

    def save(self, path) -> None:
        """Write a checkpoint atomically.

        Layout (little-endian): 8-byte magic ``LFIBWIN\\0``; u16 format
        version; u32 header length; UTF-8 JSON header with keys ``k``,
        ``upto``, ``capacity``, ``held``, ``mode``, ``moduli``, ``crc32``;
        payload.  Exact payload: ``held`` stored values, then the current
        value and the prefix sum, each as a u32 byte count followed by the
        unsigned little-endian integer.  Residue payload: ``held`` columns of
        the u32 residue matrix in row-major order (one row per modulus), then
        the current and prefix residue vectors as u32.
        """
        path = Path(path)
        data = self.to_bytes()
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path, *, memory_budget_bytes: int | None = None) -> SequenceWindow:
        data = Path(path).read_bytes()
        if data[:8] != CHECKPOINT_MAGIC:
            raise ValueError("not a lagfib checkpoint")
        version, hlen = struct.unpack_from("<HI", data, 8)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        start = 8 + struct.calcsize("<HI")
        header = json.loads(data[start : start + hlen])
        payload = data[start + hlen :]
        if zlib.crc32(payload) != header["crc32"]:
            raise ValueError("checkpoint payload is corrupt")
        win = cls(header["k"], header["capacity"], header["moduli"], memory_budget_bytes=memory_budget_bytes)
        held = header["held"]
        if header["mode"] == "exact":
            values, pos = [], 0
            for _ in range(held + 2):
                (size,) = struct.unpack_from("<I", payload, pos)
                pos += 4
                values.append(int.from_bytes(payload[pos : pos + size], "little"))
                pos += size
            win._store = values[:held]
            win.current, win.prefix = values[held], values[held + 1]
        else:
            p = len(win.moduli)
            arr = np.frombuffer(payload, dtype="<u4")
            win._store[:, :held] = arr[: p * held].reshape(p, held)
            win.current = arr[p * held : p * held + p].astype(np.uint64)
            win.prefix = arr[p * held + p : p * held + 2 * p].astype(np.uint64)
        win.upto = header["upto"]
        return win


def _pack_int(v: int) -> bytes:
    raw = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "little")
    return struct.pack("<I", len(raw)) + raw


# -- public operations ----------------------------------------------------------


def compute_a(k: int, n: int, *, memory_budget_bytes: int | None = None) -> int:
    """Exact a_k(n)."""
    _check_k(k)
    if n < 0:
        raise DomainError("n must be nonnegative")
    win = SequenceWindow(k, n, memory_budget_bytes=memory_budget_bytes)
    win.advance(n)
    return win.current


def compute_a_mod(k: int, n: int, moduli, *, memory_budget_bytes: int | None = None):
    """Residues of a_k(n) and of sum_{j<n} a_k(j) modulo each of ``moduli``.

    Returns two lists of ints aligned with ``moduli``.
    """
    _check_k(k)
    moduli = [int(m) for m in moduli]
    for i, a in enumerate(moduli):
        for b in moduli[i + 1 :]:
            if math.gcd(a, b) != 1:
                raise ValueError("moduli must be pairwise coprime")
    win = SequenceWindow(k, n, moduli, memory_budget_bytes=memory_budget_bytes)
    win.advance(n)
    return [int(v) for v in win.current], [int(v) for v in win.prefix]


def a_at_kn(k: int, n: int, window: SequenceWindow) -> int:
    """a_k(kn) from a window standing at index ``n``."""
    if window.k != k or window.upto != n:
        raise ValueError("window must be advanced to index n for the same k")
    if window.exact:
        return window.current + k * window.prefix
    cur = window.to_int(window.current)
    pre = window.to_int(window.prefix)
    return cur + k * pre


def ln_int(value: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpmath.mpf:
    with ctx.work():
        return mpmath.log(mpmath.mpf(value))


def ln_a(k: int, n: int, ctx: PrecisionContext = DEFAULT_CONTEXT, **kw) -> mpmath.mpf:
    """Natural logarithm of the exact a_k(n)."""
    return ln_int(compute_a(k, n, **kw), ctx)


def ratio_from_values(a_n: int, a_kn: int, n: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> mpmath.mpf:
    """c = a(kn) / a(n) * ln n / n from exact integers."""
    with ctx.work():
        return mpmath.mpf(a_kn) / a_n * mpmath.log(n) / n


def ratio_c(k: int, n: int, ctx: PrecisionContext = DEFAULT_CONTEXT, **kw) -> mpmath.mpf:
    """Exact-data ratio c_k(n) = a_k(kn) / a_k(n) * ln n / n."""
    _check_k(k)
    if n < 2:
        raise DomainError("c_k(n) needs n >= 2")
    win = SequenceWindow(k, n, **kw)
    win.advance(n)
    return ratio_from_values(win.current, a_at_kn(k, n, win), n, ctx)


def exact_ratios(k: int, ns, ctx: PrecisionContext = DEFAULT_CONTEXT, *, moduli=None, **kw) -> dict:
    """``{n: (a_k(n), a_k(kn), c_k(n))}`` for several n in a single pass."""
    ns = sorted({int(n) for n in ns})
    if not ns or ns[0] < 2:
        raise DomainError("c_k(n) needs n >= 2")
    win = SequenceWindow(k, ns[-1], moduli, **kw)
    out = {}
    for n in ns:
        win.advance(n)
        a_n = win.to_int(win.current)
        a_kn = a_at_kn(k, n, win)
        out[n] = (a_n, a_kn, ratio_from_values(a_n, a_kn, n, ctx))
    return out
