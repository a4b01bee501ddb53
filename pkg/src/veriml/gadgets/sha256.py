"""SHA-256 as a bit-level R1CS gadget.

Bits are linear combinations (constants fold away, so the padding block and
the fixed schedule of constant words cost nothing).  Per non-constant bit:
xor 1 constraint, ch 1, maj 2; a k-word modular addition costs 32 + carry
bits + 1.  All witness bits are produced by a single solver that replays the
compression at word level and scatters the bits with numpy.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..r1cs import LC, Assignment, Circuit, lc_sum

M32 = 0xFFFFFFFF

K = (
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1, 0x923F82A4, 0xAB1C5ED5,
    0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3, 0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174,
    0xE49B69C1, 0xEFBE4786, 0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147, 0x06CA6351, 0x14292967,
    0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13, 0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85,
    0xA2BFE8A1, 0xA81A664B, 0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A, 0x5B9CCA4F, 0x682E6FF3,
    0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208, 0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
)
H0 = (0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A, 0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19)

_LOAD, _XOR, _AND, _CH, _MAJ, _ROTR, _SHR, _ADD = range(8)

Bit = LC | int


class Word:
    __slots__ = ("vid", "bits")

    def __init__(self, vid: int, bits: list[Bit]):
        self.vid = vid
        self.bits = bits  # little-endian


class ShaProgram:
    """Word-level replay of the gadget, used as the bulk witness solver."""

    def __init__(self, c: Circuit):
        self.c = c
        self.template: list[int] = []
        self.ops: list[tuple] = []
        self.w_idx: list[int] = []
        self.w_vid: list[int] = []
        self.w_pos: list[int] = []
        self._arrays = None

    def _vid(self, value: int = 0) -> int:
        self.template.append(value)
        return len(self.template) - 1

    def _bitwire(self, vid: int, pos: int) -> LC:
        w = self.c.new_wire().index
        self.w_idx.append(w)
        self.w_vid.append(vid)
        self.w_pos.append(pos)
        return LC.wire(w)

    # -- words -------------------------------------------------------------
    def const(self, value: int) -> Word:
        return Word(self._vid(value), [(value >> k) & 1 for k in range(32)])

    def load(self, bits: Sequence[Bit]) -> Word:
        """Word whose bits are given (single wires or constants)."""
        const = 0
        wires, shifts = [], []
        for k, b in enumerate(bits):
            if isinstance(b, int):
                const |= b << k
            else:
                i = b.single_wire()
                if i is None:
                    raise ValueError("message bits must be single wires or constants")
                wires.append(i)
                shifts.append(k)
        vid = self._vid(const)
        if wires:
            self.ops.append((_LOAD, vid, np.asarray(wires), np.asarray([1 << s for s in shifts], dtype=np.int64), const))
        return Word(vid, list(bits))

    def rotr(self, a: Word, n: int) -> Word:
        vid = self._vid()
        self.ops.append((_ROTR, vid, a.vid, n))
        return Word(vid, [a.bits[(k + n) % 32] for k in range(32)])

    def shr(self, a: Word, n: int) -> Word:
        vid = self._vid()
        self.ops.append((_SHR, vid, a.vid, n))
        return Word(vid, [a.bits[k + n] if k + n < 32 else 0 for k in range(32)])

    def xor(self, a: Word, b: Word) -> Word:
        vid = self._vid()
        self.ops.append((_XOR, vid, a.vid, b.vid))
        c = self.c
        out: list[Bit] = []
        for k, (x, y) in enumerate(zip(a.bits, b.bits)):
            if isinstance(x, int) and isinstance(y, int):
                out.append(x ^ y)
            elif isinstance(x, int):
                out.append(y if x == 0 else 1 - y)
            elif isinstance(y, int):
                out.append(x if y == 0 else 1 - x)
            else:
                w = self._bitwire(vid, k)
                c.enforce(2 * x, y, x + y - w)
                out.append(w)
        return Word(vid, out)

    def _and_bit(self, x: Bit, y: Bit, vid: int, k: int) -> Bit:
        if isinstance(x, int):
            return y if x else 0
        if isinstance(y, int):
            return x if y else 0
        w = self._bitwire(vid, k)
        self.c.enforce(x, y, w)
        return w

    def ch(self, e: Word, f: Word, g: Word) -> Word:
        vid = self._vid()
        self.ops.append((_CH, vid, e.vid, f.vid, g.vid))
        out: list[Bit] = []
        for k, (x, y, z) in enumerate(zip(e.bits, f.bits, g.bits)):
            # ch = z + x * (y - z)
            if isinstance(x, int):
                out.append(y if x else z)
            elif isinstance(y, int) and isinstance(z, int):
                out.append(z + (y - z) * x if y != z else z)
            else:
                w = self._bitwire(vid, k)
                self.c.enforce(x, y - z if isinstance(y, int) else y - z, w - z)
                out.append(w)
        return Word(vid, out)

    def maj(self, a: Word, b: Word, cc: Word) -> Word:
        t_vid = self._vid()
        self.ops.append((_AND, t_vid, b.vid, cc.vid))
        vid = self._vid()
        self.ops.append((_MAJ, vid, a.vid, b.vid, cc.vid))
        out: list[Bit] = []
        for k, (x, y, z) in enumerate(zip(a.bits, b.bits, cc.bits)):
            # maj = t + x * (y + z - 2t) with t = y*z
            t = self._and_bit(y, z, t_vid, k)
            s = y + z - 2 * t
            if isinstance(x, int):
                out.append(t + x * s)
            elif isinstance(s, int):
                out.append(t + s * x)
            else:
                w = self._bitwire(vid, k)
                self.c.enforce(x, s, w - t)
                out.append(w)
        return Word(vid, out)

    def add(self, *words: Word, const: int = 0) -> Word:
        total_max = len(words) * M32 + const
        carry_bits = max((total_max >> 32).bit_length(), 0)
        vid = self._vid()
        cvid = self._vid()
        self.ops.append((_ADD, vid, cvid, tuple(w.vid for w in words), const))
        terms = [const]
        for w in words:
            for k, b in enumerate(w.bits):
                terms.append(b * (1 << k) if isinstance(b, int) else b * (1 << k))
        total = lc_sum(terms)
        if total.is_const():
            v = total.const_value()
            self.template[vid] = v & M32
            return Word(vid, [(v >> k) & 1 for k in range(32)])
        c = self.c
        outs = [self._bitwire(vid, k) for k in range(32)]
        carries = [self._bitwire(cvid, j) for j in range(carry_bits)]
        for b in outs + carries:
            c.enforce(b, b - 1, 0)
        packed = lc_sum([b * (1 << k) for k, b in enumerate(outs)] + [b * (1 << (32 + j)) for j, b in enumerate(carries)])
        c.enforce(total - packed, 1, 0)
        return Word(vid, outs)

    # -- solver ------------------------------------------------------------
    def run(self, z: Assignment) -> None:
        vals = list(self.template)
        small = z.small
        for op in self.ops:
            k = op[0]
            if k == _XOR:
                vals[op[1]] = vals[op[2]] ^ vals[op[3]]
            elif k == _ROTR:
                x, n = vals[op[2]], op[3]
                vals[op[1]] = ((x >> n) | (x << (32 - n))) & M32
            elif k == _SHR:
                vals[op[1]] = vals[op[2]] >> op[3]
            elif k == _ADD:
                s = sum(vals[i] for i in op[3]) + op[4]
                vals[op[1]] = s & M32
                vals[op[2]] = s >> 32
            elif k == _CH:
                e = vals[op[2]]
                vals[op[1]] = (e & vals[op[3]]) ^ (~e & M32 & vals[op[4]])
            elif k == _AND:
                vals[op[1]] = vals[op[2]] & vals[op[3]]
            elif k == _MAJ:
                a, b, c = vals[op[2]], vals[op[3]], vals[op[4]]
                vals[op[1]] = (a & b) ^ (a & c) ^ (b & c)
            elif k == _LOAD:
                vals[op[1]] = op[4] | int(small[op[2]] @ op[3])
        if self._arrays is None:
            self._arrays = (
                np.asarray(self.w_idx, dtype=np.int64),
                np.asarray(self.w_vid, dtype=np.int64),
                np.asarray(self.w_pos, dtype=np.int64),
            )
        idx, vid, pos = self._arrays
        arr = np.asarray(vals, dtype=np.int64)
        small[idx] = (arr[vid] >> pos) & 1
        z.assigned[idx] = True
        if z.big:
            for i in self.w_idx:
                z.big.pop(i, None)
        self.last_values = vals


def _compress(prog: ShaProgram, state: list[Word], block: list[Word]) -> list[Word]:
    w = list(block)
    for t in range(16, 64):
        x, y = w[t - 15], w[t - 2]
        s0 = prog.xor(prog.xor(prog.rotr(x, 7), prog.rotr(x, 18)), prog.shr(x, 3))
        s1 = prog.xor(prog.xor(prog.rotr(y, 17), prog.rotr(y, 19)), prog.shr(y, 10))
        w.append(prog.add(s1, w[t - 7], s0, w[t - 16]))
    a, b, c, d, e, f, g, h = state
    for t in range(64):
        S1 = prog.xor(prog.xor(prog.rotr(e, 6), prog.rotr(e, 11)), prog.rotr(e, 25))
        ch = prog.ch(e, f, g)
        S0 = prog.xor(prog.xor(prog.rotr(a, 2), prog.rotr(a, 13)), prog.rotr(a, 22))
        mj = prog.maj(a, b, c)
        new_e = prog.add(d, h, S1, ch, w[t], const=K[t])
        new_a = prog.add(h, S1, ch, w[t], S0, mj, const=K[t])
        a, b, c, d, e, f, g, h = new_a, a, b, c, new_e, e, f, g
    return [prog.add(x, y) for x, y in zip(state, (a, b, c, d, e, f, g, h))]


def padded_bits(msg_bits: Sequence[Bit]) -> list[Bit]:
    """Standard SHA-256 padding over little-endian-within-byte message bits."""
    if len(msg_bits) % 8:
        raise ValueError("message must be a whole number of bytes")
    nbytes = len(msg_bits) // 8
    total = ((nbytes + 9 + 63) // 64) * 64
    pad = bytearray(total - nbytes)
    pad[0] = 0x80
    pad[-8:] = (8 * nbytes).to_bytes(8, "big")
    out = list(msg_bits)
    for byte in pad:
        out.extend((byte >> k) & 1 for k in range(8))
    return out


def _words_from_bits(prog: ShaProgram, bits: Sequence[Bit]) -> list[Word]:
    words = []
    for j in range(len(bits) // 32):
        # big-endian word: bit k lives in byte 4j + 3 - k//8
        wb = [bits[8 * (4 * j + 3 - k // 8) + k % 8] for k in range(32)]
        words.append(prog.load(wb))
    return words


def sha256_digest(c: Circuit, msg_bits: Sequence[Bit]) -> list[Word]:
    """SHA-256 of a byte string given as bits (byte order, LSB first within a byte)."""
    prog = ShaProgram(c)
    bits = padded_bits(msg_bits)
    state = [prog.const(h) for h in H0]
    for blk in range(len(bits) // 512):
        state = _compress(prog, state, _words_from_bits(prog, bits[512 * blk : 512 * (blk + 1)]))
    c.solver(prog.run)
    return state


def sha256_one_block(c: Circuit, msg_bits: Sequence[Bit]) -> list[Word]:
    if len(msg_bits) > 447:
        raise ValueError("message does not fit one padded block (max 447 bits)")
    return sha256_digest(c, msg_bits)


def word_lc(word: Word) -> LC:
    return lc_sum([b * (1 << k) for k, b in enumerate(word.bits)])


def bind_digest(c: Circuit, digest: list[Word], out_words: Sequence[LC]) -> None:
    """Constrain 8 public word wires to the digest words (big-endian word order)."""
    for word, out in zip(digest, out_words):
        lc = word_lc(word)
        c.enforce(lc - out, 1, 0)
        i = out.single_wire()
        c.solver(lambda z, lc=lc, i=i: z.__setitem__(i, z.eval(lc)))


def bytes_to_bits(data: bytes) -> list[int]:
    return [(byte >> k) & 1 for byte in data for k in range(8)]


def digest_words(digest: bytes) -> list[int]:
    return [int.from_bytes(digest[4 * j : 4 * j + 4], "big") for j in range(8)]
