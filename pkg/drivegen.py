#!/usr/bin/env python3
"""
Drive Generator - streams the H_z / H_x label sequence for random multipolar
(RMD), Thue-Morse and Floquet drives
"""

import copy
import logging
import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, List, Optional

import numpy as np

from errors import InvalidArgumentError, ResourceLimitError

logger = logging.getLogger(__name__)

MAX_BLOCK_ORDER = 30


class HamLabel(IntEnum):
    """Which Hamiltonian generates the rotation of one period"""
    Z = 0
    X = 1

    def flipped(self) -> "HamLabel":
        return HamLabel.X if self is HamLabel.Z else HamLabel.Z


class DriveKind(Enum):
    RMD = "rmd"
    THUE_MORSE = "thue-morse"
    FLOQUET = "floquet"


@dataclass(frozen=True)
class DriveSpec:
    """A drive family; `order` and `seed` only matter for RMD"""
    kind: DriveKind
    order: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind is DriveKind.RMD and self.order < 0:
            raise InvalidArgumentError(f"RMD order must be >= 0, got {self.order}")

    @property
    def label(self) -> str:
        if self.kind is DriveKind.RMD:
            return f"rmd:{self.order}"
        return self.kind.value

    @property
    def block_length(self) -> int:
        """Natural sampling stride: 2^n for RMD"""
        if self.kind is DriveKind.RMD:
            return 1 << self.order
        if self.kind is DriveKind.FLOQUET:
            return 2
        return 8

    def with_seed(self, seed: int) -> "DriveSpec":
        return DriveSpec(self.kind, self.order, seed)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "DriveSpec":
        """Parse 'rmd:<n>', 'thue-morse' or 'floquet'"""
        text = text.strip().lower()
        match = re.fullmatch(r"rmd:(\d+)", text)
        if match:
            return cls(DriveKind.RMD, int(match.group(1)), seed)
        if text in ("thue-morse", "thuemorse", "tm"):
            return cls(DriveKind.THUE_MORSE, seed=seed)
        if text == "floquet":
            return cls(DriveKind.FLOQUET, seed=seed)
        raise InvalidArgumentError(f"unknown drive {text!r}; expected 'rmd:<n>', 'thue-morse' or 'floquet'")


@dataclass(frozen=True)
class BlockPair:
    """The two mutually flipped n-polar blocks, each of length 2^n"""
    order: int
    plus_block: np.ndarray
    minus_block: np.ndarray

    def as_labels(self, which: str = "plus") -> List[HamLabel]:
        block = self.plus_block if which == "plus" else self.minus_block
        return [HamLabel(int(v)) for v in block]


def build_blocks(n: int) -> BlockPair:
    """
    B0+ = (Z), B0- = (X); Bn+ = Bn-1+ ++ Bn-1-, Bn- = Bn-1- ++ Bn-1+.

    Block length is 2^n (n=1 gives (Z,X)/(X,Z), n=2 gives (Z,X,X,Z)/(X,Z,Z,X)).
    """
    if n < 0:
        raise InvalidArgumentError(f"block order must be >= 0, got {n}")
    if n > MAX_BLOCK_ORDER:
        raise ResourceLimitError(f"block order {n} exceeds {MAX_BLOCK_ORDER} (2^{n} labels per block)")

    plus = np.array([HamLabel.Z], dtype=np.uint8)
    minus = np.array([HamLabel.X], dtype=np.uint8)
    for _ in range(n):
        plus, minus = np.concatenate([plus, minus]), np.concatenate([minus, plus])
    return BlockPair(n, plus, minus)


def thue_morse_label(k: int) -> HamLabel:
    """Z when the binary digit sum of k is even, X when odd"""
    if k < 0:
        raise InvalidArgumentError(f"Thue-Morse index must be >= 0, got {k}")
    return HamLabel(bin(k).count("1") & 1)


def _thue_morse_array(start: int, count: int) -> np.ndarray:
    k = np.arange(start, start + count, dtype=np.uint64)
    parity = np.zeros(count, dtype=np.uint64)
    while k.any():
        parity ^= k & np.uint64(1)
        k >>= np.uint64(1)
    return parity.astype(np.uint8)


def labels_to_string(labels: Iterable[int]) -> str:
    return "".join("Z" if int(v) == HamLabel.Z else "X" for v in labels)


class DriveGenerator:
    """
    Single-consumer stream of labels for one drive realization.

    RMD block choices use a dedicated numpy Generator seeded from the DriveSpec and
    consume exactly one double per block, so the sequence does not depend on
    how many labels are pulled per call.
    """

    def __init__(self, spec: DriveSpec):
        self.spec = spec
        self.cursor = 0
        self._rng: Optional[np.random.Generator] = None
        self._table: Optional[np.ndarray] = None
        self._block: Optional[np.ndarray] = None
        self._offset = 0
        if spec.kind is DriveKind.RMD:
            blocks = build_blocks(spec.order)
            self._table = np.stack([blocks.plus_block, blocks.minus_block])
            self._rng = np.random.default_rng(spec.seed)

    def _next_choices(self, count: int) -> np.ndarray:
        return (self._rng.random(count) >= 0.5).astype(np.intp)

    def next_label(self) -> HamLabel:
        return HamLabel(int(self.take(1)[0]))

    def take(self, count: int) -> np.ndarray:
        """Next `count` labels as a uint8 array (0 = Z, 1 = X)"""
        if count < 0:
            raise InvalidArgumentError(f"count must be >= 0, got {count}")
        kind = self.spec.kind
        if kind is DriveKind.FLOQUET:
            out = (np.arange(self.cursor, self.cursor + count) % 2).astype(np.uint8)
        elif kind is DriveKind.THUE_MORSE:
            out = _thue_morse_array(self.cursor, count)
        else:
            out = self._take_rmd(count)
        self.cursor += count
        return out

    def _take_rmd(self, count: int) -> np.ndarray:
        block_len = self._table.shape[1]
        pieces = []
        remaining = count
        if self._block is not None and self._offset < block_len:
            head = self._block[self._offset:self._offset + remaining]
            pieces.append(head)
            self._offset += len(head)
            remaining -= len(head)
        if remaining > 0:
            n_blocks = -(-remaining // block_len)
            choices = self._next_choices(n_blocks)
            fresh = self._table[choices].ravel()
            pieces.append(fresh[:remaining])
            self._block = self._table[choices[-1]]
            self._offset = block_len - (n_blocks * block_len - remaining)
        if not pieces:
            return np.empty(0, dtype=np.uint8)
        return np.concatenate(pieces).astype(np.uint8, copy=False)

    def clone(self) -> "DriveGenerator":
        """Independent copy positioned at the same cursor"""
        return copy.deepcopy(self)

    def dump(self, count: int) -> str:
        """First `count` labels of a fresh copy of this drive as 'Z'/'X' text"""
        return labels_to_string(DriveGenerator(self.spec).take(count))
