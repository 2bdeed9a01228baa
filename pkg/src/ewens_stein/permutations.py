"""Permutations of {1, ..., n} with cycle bookkeeping.

All public labels are 1-based (elements of [n] = {1, ..., n}); the internal
image array is also kept 1-based so that serialization is a plain copy.
Cycle structure is computed once and cached, since everything downstream
(Ewens weights, case classification, reduced permutations) keeps asking
for it.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence

__all__ = [
    "Permutation",
    "CycleType",
    "cycle_type",
    "reduce_delete",
    "restrict_cycles",
    "mapping_cycles",
    "mapping_cycle_count",
]


class Permutation:
    """A bijection of [n], stored as a one-line image array.

    ``Permutation([2, 3, 1])`` is the 3-cycle sending 1 -> 2 -> 3 -> 1.
    Instances are immutable; cycle data is computed lazily and cached.
    """

    __slots__ = ("_image", "_inverse", "_cycles", "_cycle_len")

    def __init__(self, images: Sequence[int]):
        image = tuple(int(x) for x in images)
        n = len(image)
        if n == 0:
            raise ValueError("a permutation needs at least one element")
        seen = [False] * (n + 1)
        for x in image:
            if not 1 <= x <= n:
                raise ValueError(f"image label {x} is outside [1, {n}]")
            if seen[x]:
                raise ValueError(f"not a bijection: label {x} appears twice")
            seen[x] = True
        self._image = image
        self._inverse: tuple[int, ...] | None = None
        self._cycles: tuple[tuple[int, ...], ...] | None = None
        self._cycle_len: tuple[int, ...] | None = None

    # -- construction helpers -------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(1, n + 1))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Iterable[int]]) -> "Permutation":
        """Build from a cycle decomposition; omitted labels are fixed points."""
        image = list(range(1, n + 1))
        touched = set()
        for cyc in cycles:
            cyc = list(cyc)
            for a in cyc:
                if a in touched:
                    raise ValueError(f"label {a} appears in two cycles")
                touched.add(a)
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                image[a - 1] = b
        return cls(image)

    # -- basic protocol ---------------------------------------------------

    @property
    def n(self) -> int:
        return len(self._image)

    @property
    def image(self) -> tuple[int, ...]:
        """The one-line image tuple, 1-based: image[i-1] = pi(i)."""
        return self._image

    def __call__(self, i: int) -> int:
        return self._image[i - 1]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Permutation) and self._image == other._image

    def __hash__(self) -> int:
        return hash(self._image)

    def __repr__(self) -> str:
        body = "".join(
            "(" + " ".join(str(x) for x in cyc) + ")" for cyc in self.cycles()
        )
        return f"Permutation[{body}]"

    # -- cycle structure --------------------------------------------------

    def inverse(self, i: int) -> int:
        """pi^{-1}(i)."""
        if self._inverse is None:
            inv = [0] * self.n
            for pos, x in enumerate(self._image):
                inv[x - 1] = pos + 1
            self._inverse = tuple(inv)
        return self._inverse[i - 1]

    def cycles(self) -> tuple[tuple[int, ...], ...]:
        """Cycle decomposition; each cycle starts at its least label,
        cycles ordered by least label."""
        if self._cycles is None:
            n = self.n
            img = self._image
            seen = [False] * (n + 1)
            out = []
            for start in range(1, n + 1):
                if seen[start]:
                    continue
                cyc = []
                x = start
                while not seen[x]:
                    seen[x] = True
                    cyc.append(x)
                    x = img[x - 1]
                out.append(tuple(cyc))
            self._cycles = tuple(out)
        return self._cycles

    def cycle_count(self) -> int:
        return len(self.cycles())

    def cycle_len(self, i: int) -> int:
        """Length of the cycle containing label i."""
        if self._cycle_len is None:
            lens = [0] * (self.n + 1)
            for cyc in self.cycles():
                for a in cyc:
                    lens[a] = len(cyc)
            self._cycle_len = tuple(lens)
        return self._cycle_len[i]

    def same_cycle(self, i: int, j: int) -> bool:
        img = self._image
        x = img[i - 1]
        while x != i:
            if x == j:
                return True
            x = img[x - 1]
        return i == j

    def fixed_points(self) -> tuple[int, ...]:
        return tuple(i for i, x in enumerate(self._image, start=1) if x == i)

    # -- operations used by the Stein-pair machinery ----------------------

    def conjugate_by_transposition(self, i: int, j: int) -> "Permutation":
        """tau pi tau for the transposition tau = (i j)."""
        if i == j:
            return self
        img = list(self._image)
        # conjugation relabels i <-> j in the cycle representation:
        # swap the rows, then swap occurrences of i and j in the images.
        img[i - 1], img[j - 1] = img[j - 1], img[i - 1]
        pi, pj = self.inverse(i), self.inverse(j)
        pi = j if pi == i else (i if pi == j else pi)
        pj = j if pj == i else (i if pj == j else pj)
        img[pi - 1], img[pj - 1] = j, i
        return Permutation(img)

    # -- serialization ----------------------------------------------------

    def to_list(self) -> list[int]:
        """JSON-friendly 1-based image array."""
        return list(self._image)


class CycleType:
    """Cycle-count vector c = (c_1, ..., c_n); c_j counts the j-cycles."""

    __slots__ = ("_counts",)

    def __init__(self, counts: Sequence[int]):
        counts = tuple(int(c) for c in counts)
        if any(c < 0 for c in counts):
            raise ValueError("cycle counts must be nonnegative")
        self._counts = counts

    @property
    def counts(self) -> tuple[int, ...]:
        return self._counts

    @property
    def n(self) -> int:
        return len(self._counts)

    def weight(self) -> int:
        """sum_j j * c_j — equals n exactly when the type is realizable."""
        return sum(j * c for j, c in enumerate(self._counts, start=1))

    def is_valid(self) -> bool:
        return self.weight() == self.n

    def cycle_count(self) -> int:
        return sum(self._counts)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CycleType) and self._counts == other._counts

    def __hash__(self) -> int:
        return hash(self._counts)

    def __repr__(self) -> str:
        return f"CycleType{self._counts}"

    def to_list(self) -> list[int]:
        return list(self._counts)


def cycle_type(perm: Permutation) -> CycleType:
    """The vector (c_1, ..., c_n) where c_q is the number of q-cycles."""
    counts = [0] * perm.n
    for cyc in perm.cycles():
        counts[len(cyc) - 1] += 1
    return CycleType(counts)


def reduce_delete(perm: Permutation, B: Iterable[int]) -> dict[int, int]:
    """The permutation pi\\B on [n] \\ B, keeping original labels.

    Each element of B is deleted from its cycle and the gap is closed, so
    the successor of a surviving x is the first iterate of pi past any
    deleted elements.  Returned as a plain {label: image} mapping since the
    ground set is no longer [m].
    """
    dropped = set(B)
    img = perm.image
    out: dict[int, int] = {}
    for x in range(1, perm.n + 1):
        if x in dropped:
            continue
        y = img[x - 1]
        while y in dropped:
            y = img[y - 1]
        out[x] = y
    return out


def restrict_cycles(perm: Permutation, B: Iterable[int]) -> dict[int, int]:
    """The fragment pi_B: the cycles of pi lying wholly inside B."""
    keep = set(B)
    out: dict[int, int] = {}
    for cyc in perm.cycles():
        if all(a in keep for a in cyc):
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                out[a] = b
    return out


def mapping_cycles(mapping: Mapping[int, int]) -> list[tuple[int, ...]]:
    """Cycle decomposition of a bijection given as a {label: image} dict."""
    if set(mapping.keys()) != set(mapping.values()):
        raise ValueError("mapping is not a bijection of its support")
    seen: set[int] = set()
    out = []
    for start in sorted(mapping):
        if start in seen:
            continue
        cyc = []
        x = start
        while x not in seen:
            seen.add(x)
            cyc.append(x)
            x = mapping[x]
        out.append(tuple(cyc))
    return out


def mapping_cycle_count(mapping: Mapping[int, int]) -> int:
    return len(mapping_cycles(mapping))
