"""Random digital search trees: construction, profiles and Monte Carlo runs.

:func:`build_tree` is the reference implementation working from arbitrary
bit sources.  :func:`run_trials` drives the compiled kernel, which uses the
same SplitMix64 streams and therefore grows identical trees.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence

import numpy as np

from .bits import MASK, BitSource, SplitMixBits
from .errors import DomainError

STATS = frozenset({"profile", "height", "saturation", "unsuccessful"})


@dataclass
class DstTree:
    """Index-based node arrays; node 0 is the root, -1 marks an empty slot."""
    n: int
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    depth: List[int] = field(default_factory=list)

    def insert(self, source: BitSource):
        if self.n == 0:
            self._add(0)
            return
        node, d = 0, 0
        while True:
            side = self.right if source.bit(d) else self.left
            child = side[node]
            if child == -1:
                side[node] = len(self.depth)
                self._add(d + 1)
                return
            node, d = child, d + 1

    def _add(self, depth: int):
        self.left.append(-1)
        self.right.append(-1)
        self.depth.append(depth)
        self.n += 1

    def external_depths(self) -> List[int]:
        """Depths of all external nodes in level order."""
        if self.n == 0:
            return [0]
        out = []
        for i, d in enumerate(self.depth):
            out.extend([d + 1] * ((self.left[i] == -1) + (self.right[i] == -1)))
        return sorted(out)


def build_tree(sources: Sequence[BitSource], n: Optional[int] = None) -> DstTree:
    """Insert the first ``n`` records (all by default) into an empty tree."""
    if n is None:
        n = len(sources)
    if n < 0 or n > len(sources):
        raise DomainError("need 0 <= n <= number of sources")
    tree = DstTree(0)
    for src in sources[:n]:
        tree.insert(src)
    return tree


def simulate_tree(n: int, master_seed: int, trial: int) -> DstTree:
    """Tree of trial ``trial`` grown from the pseudorandom streams."""
    return build_tree([SplitMixBits(master_seed, trial, r) for r in range(n)])


@dataclass(frozen=True)
class ProfileSummary:
    n: int
    external: tuple
    internal: tuple
    height: int
    saturation: int


def profiles(tree: DstTree) -> ProfileSummary:
    """External and internal profiles, height and saturation level.

    Both sequences run over levels 0..H.  The empty tree has B = (1,),
    I = (0,), height 0 and saturation -1.
    """
    if tree.n == 0:
        return ProfileSummary(0, (1,), (0,), 0, -1)
    top = max(tree.depth) + 1
    ext = [0] * (top + 1)
    inn = [0] * (top + 1)
    for d in tree.depth:
        inn[d] += 1
    for d in tree.external_depths():
        ext[d] += 1
    height = max(k for k, b in enumerate(ext) if b)
    sat = -1
    for k, c in enumerate(inn):
        if c != 1 << k:
            break
        sat = k
    return ProfileSummary(tree.n, tuple(ext), tuple(inn), height, sat)


def _uniform_index(source: BitSource, m: int) -> int:
    nbits = (m - 1).bit_length()
    pos = 0
    while True:
        v = 0
        for _ in range(nbits):
            v = (v << 1) | source.bit(pos)
            pos += 1
        if v < m:
            return v


def sample_unsuccessful_depth(tree: DstTree, source: BitSource) -> int:
    """Depth of a uniformly chosen external node (uniform over the n+1 slots)."""
    depths = tree.external_depths()
    return depths[_uniform_index(source, len(depths))]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialConfig:
    n: int
    trials: int
    master_seed: int = 0
    stats: FrozenSet[str] = STATS

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be >= 0")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        bad = set(self.stats) - STATS
        if bad:
            raise DomainError(f"unknown statistics {sorted(bad)}")


def _pad(xs: List[int], size: int) -> List[int]:
    return xs + [0] * (size - len(xs))


@dataclass
class EmpiricalMoments:
    """Exact integer accumulators; means and variances derive from them."""
    n: int
    trials: int
    ext_sum: List[int]
    ext_sq: List[int]
    int_sum: List[int]
    int_sq: List[int]
    height_hist: Dict[int, int]
    sat_hist: Dict[int, int]
    unsucc_hist: Dict[int, int]

    @property
    def levels(self) -> int:
        return len(self.ext_sum)

    def _mean(self, sums, k) -> float:
        return float(Fraction(sums[k], self.trials)) if k < len(sums) else 0.0

    def _var(self, sums, sq, k) -> float:
        if k >= len(sums) or self.trials < 2:
            return 0.0
        m2 = Fraction(sq[k]) - Fraction(sums[k] ** 2, self.trials)
        return float(m2 / (self.trials - 1))

    def mean_external(self, k: int) -> float:
        return self._mean(self.ext_sum, k)

    def var_external(self, k: int) -> float:
        """Unbiased sample variance of B_{n,k}."""
        return self._var(self.ext_sum, self.ext_sq, k)

    def mean_internal(self, k: int) -> float:
        return self._mean(self.int_sum, k)

    def var_internal(self, k: int) -> float:
        return self._var(self.int_sum, self.int_sq, k)

    @staticmethod
    def _hist_mean(h: Dict[int, int]) -> float:
        total = sum(h.values())
        return float(Fraction(sum(k * c for k, c in h.items()), total)) if total else 0.0

    def mean_height(self) -> float:
        return self._hist_mean(self.height_hist)

    def mean_saturation(self) -> float:
        return self._hist_mean(self.sat_hist)

    def pmf(self, which: str) -> Dict[int, float]:
        h = {"height": self.height_hist, "saturation": self.sat_hist,
             "unsuccessful": self.unsucc_hist}[which]
        total = sum(h.values())
        return {k: c / total for k, c in sorted(h.items())}

    def merge(self, other: "EmpiricalMoments") -> "EmpiricalMoments":
        if other.n != self.n:
            raise DomainError("cannot merge runs with different n")
        size = max(self.levels, other.levels)

        def add(a, b):
            return [x + y for x, y in zip(_pad(a, size), _pad(b, size))]

        return EmpiricalMoments(
            self.n, self.trials + other.trials,
            add(self.ext_sum, other.ext_sum), add(self.ext_sq, other.ext_sq),
            add(self.int_sum, other.int_sum), add(self.int_sq, other.int_sq),
            dict(Counter(self.height_hist) + Counter(other.height_hist)),
            dict(Counter(self.sat_hist) + Counter(other.sat_hist)),
            dict(Counter(self.unsucc_hist) + Counter(other.unsucc_hist)))

    def trimmed(self) -> "EmpiricalMoments":
        """Drop trailing all-zero levels so equal runs compare equal."""
        top = max((k for k in range(self.levels) if self.ext_sum[k] or self.int_sum[k]),
                  default=0) + 1
        return EmpiricalMoments(self.n, self.trials, self.ext_sum[:top], self.ext_sq[:top],
                                self.int_sum[:top], self.int_sq[:top],
                                dict(sorted(self.height_hist.items())),
                                dict(sorted(self.sat_hist.items())),
                                dict(sorted(self.unsucc_hist.items())))


def _level_cap(n: int) -> int:
    return min(n + 2, 128)


def _block(n: int, seed: int, t0: int, t1: int, level: int = -1):
    from . import _kernels

    L = _level_cap(n)
    while True:
        T = t1 - t0
        arrays = [np.zeros(L, np.int64) for _ in range(4)]
        per = [np.zeros(T, np.int64) for _ in range(5)]
        ok = _kernels.run_block(n, np.uint64(seed & MASK), t0, t1, L, level, *arrays, *per)
        if ok:
            return arrays, per
        L = min(2 * L, n + 2)


def _shard_size(n: int) -> int:
    # keeps sums of squared counts inside int64
    return max(1, min(1 << 20, (1 << 62) // ((n + 1) ** 2)))


def run_trials(config: TrialConfig, shard: Optional[int] = None) -> EmpiricalMoments:
    """Simulate ``config.trials`` independent trees with the stream family.

    Trial t, record r draws its bits from (master_seed, t, r); the uniform
    external for U_n uses (master_seed, t, n).  Results do not depend on
    ``shard``, which only bounds the block size handed to the kernel.
    """
    n = config.n
    step = min(shard or _shard_size(n), _shard_size(n))
    total: Optional[EmpiricalMoments] = None
    for t0 in range(0, config.trials, step):
        t1 = min(config.trials, t0 + step)
        (es, eq, is_, iq), (hs, ss, us, _, _) = _block(n, config.master_seed, t0, t1)
        part = EmpiricalMoments(
            n, t1 - t0,
            [int(v) for v in es], [int(v) for v in eq],
            [int(v) for v in is_], [int(v) for v in iq],
            dict(Counter(hs.tolist())) if "height" in config.stats else {},
            dict(Counter(ss.tolist())) if "saturation" in config.stats else {},
            dict(Counter(us.tolist())) if "unsuccessful" in config.stats else {})
        if "profile" not in config.stats:
            part.ext_sum = part.ext_sq = part.int_sum = part.int_sq = []
        total = part if total is None else total.merge(part)
    return total.trimmed()


def level_samples(n: int, k: int, trials: int, master_seed: int):
    """Per-trial (B_{n,k}, I_{n,k}) as two int64 arrays."""
    if k < 0:
        raise DomainError("level must be >= 0")
    ext = np.empty(trials, np.int64)
    inn = np.empty(trials, np.int64)
    step = _shard_size(n)
    for t0 in range(0, trials, step):
        t1 = min(trials, t0 + step)
        _, (_, _, _, le, li) = _block(n, master_seed, t0, t1, k)
        ext[t0:t1] = le
        inn[t0:t1] = li
    return ext, inn
