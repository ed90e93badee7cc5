"""Random linear network coding over GF(2^8).

Field elements are bytes; the field is built on the AES polynomial
x^8 + x^4 + x^3 + x + 1 with generator 3.  Vector arithmetic goes through a
full 256x256 multiplication table.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FieldError

POLY = 0x11B
GENERATOR = 0x03
PAYLOAD_LEN = 32


def _build_tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    a = 1
    for i in range(255):
        exp[i] = a
        log[a] = i
        # multiply by 3 = (a * 2) ^ a, reduced
        b = a << 1
        if b & 0x100:
            b ^= POLY
        a = b ^ a
    exp[255:510] = exp[:255]
    mul = np.zeros((256, 256), dtype=np.uint8)
    nz = np.arange(1, 256)
    mul[1:, 1:] = exp[(log[nz][:, None] + log[nz][None, :]) % 255]
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[nz]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build_tables()


def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    return int(MUL[a, b])


def gf_inv(a: int) -> int:
    if a == 0:
        raise FieldError("zero has no multiplicative inverse")
    return int(INV[a])


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


def scale(c: int, vec: np.ndarray) -> np.ndarray:
    return MUL[c][vec]


def combine(coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Sum_i coeffs[i] * rows[i] over GF(2^8)."""
    if len(coeffs) == 0:
        return np.zeros(rows.shape[1:], dtype=np.uint8)
    return np.bitwise_xor.reduce(MUL[coeffs[:, None], rows], axis=0)


@dataclass(frozen=True)
class CodedPacket:
    coefficients: np.ndarray
    payload: np.ndarray

    @property
    def k(self) -> int:
        return len(self.coefficients)

    def tag(self) -> str:
        return "c:" + bytes(self.coefficients).hex()


class DecoderState:
    """Reduced row-echelon basis of received coefficient vectors.

    Row ``r`` has a leading 1 in column ``pivots[r]`` and zeros in every
    other pivot column, and carries the payload combined the same way.
    """

    def __init__(self, k: int, payload_len: int = PAYLOAD_LEN):
        if k < 1:
            raise DimensionError("k must be >= 1")
        self.k = k
        self.payload_len = payload_len
        self.coef = np.zeros((0, k), dtype=np.uint8)
        self.data = np.zeros((0, payload_len), dtype=np.uint8)
        self.pivots: list[int] = []

    @classmethod
    def from_messages(cls, messages: np.ndarray) -> "DecoderState":
        messages = np.asarray(messages, dtype=np.uint8)
        st = cls(messages.shape[0], messages.shape[1])
        st.coef = np.eye(st.k, dtype=np.uint8)
        st.data = messages.copy()
        st.pivots = list(range(st.k))
        return st

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def full(self) -> bool:
        return self.rank == self.k

    def absorb(self, pkt: CodedPacket) -> bool:
        """Add a packet; returns True iff it was innovative."""
        c = np.asarray(pkt.coefficients, dtype=np.uint8)
        d = np.asarray(pkt.payload, dtype=np.uint8)
        if c.shape != (self.k,) or d.shape != (self.payload_len,):
            raise DimensionError(
                f"packet shape {c.shape}/{d.shape} does not match k={self.k}, len={self.payload_len}")
        if self.full:
            return False
        c = c.copy()
        d = d.copy()
        for r, col in enumerate(self.pivots):
            f = c[col]
            if f:
                c ^= MUL[f][self.coef[r]]
                d ^= MUL[f][self.data[r]]
        nz = np.flatnonzero(c)
        if nz.size == 0:
            return False
        col = int(nz[0])
        s = INV[c[col]]
        c = MUL[s][c]
        d = MUL[s][d]
        for r in range(self.rank):
            f = self.coef[r, col]
            if f:
                self.coef[r] ^= MUL[f][c]
                self.data[r] ^= MUL[f][d]
        self.coef = np.vstack([self.coef, c])
        self.data = np.vstack([self.data, d])
        self.pivots.append(col)
        return True

    def decoded(self) -> np.ndarray:
        """The k source messages; only defined at full rank."""
        if not self.full:
            raise DimensionError(f"rank {self.rank} < k={self.k}: cannot decode")
        out = np.zeros((self.k, self.payload_len), dtype=np.uint8)
        for r, col in enumerate(self.pivots):
            out[col] = self.data[r]
        return out


def encode(span: DecoderState, rng: np.random.Generator) -> CodedPacket:
    """A uniformly random non-zero combination of the span's basis rows."""
    r = span.rank
    if r == 0:
        raise DimensionError("cannot encode from an empty span")
    while True:
        c = rng.integers(0, 256, size=r, dtype=np.uint8)
        if c.any():
            break
    return CodedPacket(combine(c, span.coef), combine(c, span.data))


def in_row_space(span: DecoderState, coeffs: np.ndarray) -> bool:
    probe = DecoderState(span.k, 1)
    probe.coef, probe.data, probe.pivots = span.coef.copy(), np.zeros((span.rank, 1), np.uint8), list(span.pivots)
    return not probe.absorb(CodedPacket(np.asarray(coeffs, np.uint8), np.zeros(1, np.uint8)))
