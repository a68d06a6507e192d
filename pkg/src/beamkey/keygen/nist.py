"""Nine statistical tests from NIST SP 800-22 rev. 1a.

Each test takes a 0/1 array and returns a :class:`TestResult`. Sequences
shorter than a test's minimum length are reported as skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

ALPHA = 0.01
RANK_MIN_BITS = 38 * 1024


@dataclass(frozen=True)
class TestResult:
    name: str
    p_values: tuple[float, ...] = ()
    skipped: bool = False
    note: str = ""

    __test__ = False  # not a pytest class

    @property
    def p_value(self) -> float:
        """Smallest sub-statistic p-value; decides pass/fail."""
        return min(self.p_values) if self.p_values else float("nan")

    @property
    def passed(self) -> bool | None:
        return None if self.skipped else self.p_value >= ALPHA


def _bits(bits) -> np.ndarray:
    a = np.asarray(bits).reshape(-1).astype(np.int64)
    if a.size and not np.all((a == 0) | (a == 1)):
        raise ValueError("bit sequence must contain only 0 and 1")
    return a


def _skip(name: str, n: int, need: int) -> TestResult:
    return TestResult(name, skipped=True, note=f"needs >= {need} bits, got {n}")


def _clip(p: float) -> float:
    return float(min(max(p, 0.0), 1.0))


def frequency(bits) -> TestResult:
    e = _bits(bits)
    n = e.size
    if n < 100:
        return _skip("frequency", n, 100)
    s = abs(np.sum(2 * e - 1)) / math.sqrt(n)
    return TestResult("frequency", (_clip(erfc(s / math.sqrt(2))),))


def block_frequency(bits, M: int = 32, min_bits: int = 100) -> TestResult:
    e = _bits(bits)
    n = e.size
    if n < max(min_bits, M):
        return _skip("block_frequency", n, max(min_bits, M))
    N = n // M
    pi = e[: N * M].reshape(N, M).mean(axis=1)
    chi2 = 4.0 * M * np.sum((pi - 0.5) ** 2)
    return TestResult("block_frequency", (_clip(gammaincc(N / 2.0, chi2 / 2.0)),))


def runs(bits, min_bits: int = 100) -> TestResult:
    e = _bits(bits)
    n = e.size
    if n < min_bits:
        return _skip("runs", n, min_bits)
    pi = e.mean()
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return TestResult("runs", (0.0,), note="frequency prerequisite failed")
    v = 1 + int(np.count_nonzero(e[1:] != e[:-1]))
    num = abs(v - 2.0 * n * pi * (1 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1 - pi)
    return TestResult("runs", (_clip(erfc(num / den)),))


_LONGEST_RUN = (
    # (min n, block length, class edges (lowest, highest), probabilities)
    (750_000, 10_000, (10, 16), (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 9), (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 4), (0.2148, 0.3672, 0.2305, 0.1875)),
)


def _longest_ones(block: np.ndarray) -> int:
    best = cur = 0
    for b in block:
        cur = cur + 1 if b else 0
        best = max(best, cur)
    return best


def longest_run(bits) -> TestResult:
    e = _bits(bits)
    n = e.size
    for n_min, M, (lo, hi), probs in _LONGEST_RUN:
        if n >= n_min:
            break
    else:
        return _skip("longest_run", n, 128)
    N = n // M
    runs_ = np.array([_longest_ones(b) for b in e[: N * M].reshape(N, M)])
    v = np.bincount(np.clip(runs_, lo, hi) - lo, minlength=hi - lo + 1)
    expected = N * np.asarray(probs)
    chi2 = float(np.sum((v - expected) ** 2 / expected))
    return TestResult("longest_run", (_clip(gammaincc((len(probs) - 1) / 2.0, chi2 / 2.0)),))


def gf2_rank(mat: np.ndarray) -> int:
    """Rank over GF(2) of a 0/1 matrix."""
    rows = [int("".join(map(str, r)), 2) for r in np.asarray(mat, dtype=np.int64)]
    rank = 0
    ncols = mat.shape[1]
    for bit in range(ncols - 1, -1, -1):
        mask = 1 << bit
        pivot = next((i for i in range(rank, len(rows)) if rows[i] & mask), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] & mask:
                rows[i] ^= rows[rank]
        rank += 1
    return rank


def rank(bits, M: int = 32, Q: int = 32, min_bits: int = RANK_MIN_BITS) -> TestResult:
    e = _bits(bits)
    n = e.size
    if n < min_bits:
        return _skip("rank", n, min_bits)
    N = n // (M * Q)
    if N == 0:
        return _skip("rank", n, M * Q)
    ranks = [gf2_rank(m) for m in e[: N * M * Q].reshape(N, M, Q)]
    full = min(M, Q)
    F_full = sum(r == full for r in ranks)
    F_minus = sum(r == full - 1 for r in ranks)
    rest = N - F_full - F_minus
    chi2 = ((F_full - 0.2888 * N) ** 2 / (0.2888 * N)
            + (F_minus - 0.5776 * N) ** 2 / (0.5776 * N)
            + (rest - 0.1336 * N) ** 2 / (0.1336 * N))
    return TestResult("rank", (_clip(math.exp(-chi2 / 2.0)),))


def dft(bits, min_bits: int = 100) -> TestResult:
    e = _bits(bits)
    n = e.size
    if n < min_bits:
        return _skip("dft", n, min_bits)
    mod = np.abs(np.fft.fft(2 * e - 1))[: n // 2]
    T = math.sqrt(math.log(1 / 0.05) * n)
    N0 = 0.95 * n / 2.0
    N1 = np.count_nonzero(mod < T)
    d = (N1 - N0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return TestResult("dft", (_clip(erfc(abs(d) / math.sqrt(2))),))


def _pattern_counts(e: np.ndarray, m: int) -> np.ndarray:
    """Counts of every overlapping ``m``-bit pattern with wrap-around."""
    if m == 0:
        return np.array([e.size])
    ext = np.concatenate([e, e[: m - 1]])
    idx = np.zeros(e.size, dtype=np.int64)
    for j in range(m):
        idx = (idx << 1) | ext[j: j + e.size]
    return np.bincount(idx, minlength=2**m)


def approximate_entropy(bits, m: int = 2, min_bits: int = 100) -> TestResult:
    e = _bits(bits)
    n = e.size
    if n < min_bits:
        return _skip("approximate_entropy", n, min_bits)

    def phi(mm):
        c = _pattern_counts(e, mm) / n
        c = c[c > 0]
        return float(np.sum(c * np.log(c)))

    apen = phi(m) - phi(m + 1)
    chi2 = 2.0 * n * (math.log(2) - apen)
    return TestResult("approximate_entropy", (_clip(gammaincc(2 ** (m - 1), chi2 / 2.0)),))


def cumulative_sums(bits, min_bits: int = 100) -> TestResult:
    """Forward and backward walks; the smaller p-value decides."""
    e = _bits(bits)
    n = e.size
    if n < min_bits:
        return _skip("cumulative_sums", n, min_bits)
    x = 2 * e - 1
    ps = []
    for walk in (x, x[::-1]):
        z = int(np.max(np.abs(np.cumsum(walk))))
        ps.append(_cusum_p(n, z))
    return TestResult("cumulative_sums", tuple(ps))


def _cusum_p(n: int, z: int) -> float:
    if z == 0:
        return 0.0
    nz = n // z
    sq = math.sqrt(n)
    # bounds truncate toward zero like the reference implementation
    lo1, hi = int((-nz + 1) / 4), int((nz - 1) / 4)
    lo2 = int((-nz - 3) / 4)
    s1 = sum(norm.cdf((4 * k + 1) * z / sq) - norm.cdf((4 * k - 1) * z / sq)
             for k in range(lo1, hi + 1))
    s2 = sum(norm.cdf((4 * k + 3) * z / sq) - norm.cdf((4 * k + 1) * z / sq)
             for k in range(lo2, hi + 1))
    return _clip(1.0 - s1 + s2)


def serial(bits, m: int = 3, min_bits: int = 100) -> TestResult:
    """Both serial statistics; the smaller p-value decides."""
    e = _bits(bits)
    n = e.size
    if n < min_bits:
        return _skip("serial", n, min_bits)

    def psi2(mm):
        if mm <= 0:
            return 0.0
        v = _pattern_counts(e, mm)
        return float(2**mm / n * np.sum(v.astype(float) ** 2) - n)

    p_m, p_m1, p_m2 = psi2(m), psi2(m - 1), psi2(m - 2)
    d1 = p_m - p_m1
    d2 = p_m - 2 * p_m1 + p_m2
    return TestResult("serial", (_clip(gammaincc(2 ** (m - 2), d1 / 2.0)),
                                 _clip(gammaincc(2 ** (m - 3), d2 / 2.0))))


TESTS: dict[str, Callable[..., TestResult]] = {
    "frequency": frequency,
    "block_frequency": block_frequency,
    "runs": runs,
    "longest_run": longest_run,
    "rank": rank,
    "dft": dft,
    "approximate_entropy": approximate_entropy,
    "cumulative_sums": cumulative_sums,
    "serial": serial,
}


@dataclass
class RandomnessReport:
    """Per-test results collected over one or more sequences."""

    results: dict[str, list[TestResult]] = field(default_factory=dict)

    def add(self, r: TestResult) -> None:
        self.results.setdefault(r.name, []).append(r)

    def evaluated(self, name: str) -> list[TestResult]:
        return [r for r in self.results.get(name, []) if not r.skipped]

    def pass_ratio(self, name: str) -> float:
        rs = self.evaluated(name)
        return sum(bool(r.passed) for r in rs) / len(rs) if rs else float("nan")

    def mean_p(self, name: str) -> float:
        rs = self.evaluated(name)
        return float(np.mean([r.p_value for r in rs])) if rs else float("nan")

    def rows(self) -> list[dict]:
        out = []
        for name in self.results:
            rs = self.evaluated(name)
            out.append({
                "test": name,
                "sequences": len(rs),
                "mean_p_value": self.mean_p(name),
                "pass_ratio": self.pass_ratio(name),
                "skipped": len(self.results[name]) - len(rs),
            })
        return out


def nist_suite(bits, tests: Iterable[str] | None = None) -> RandomnessReport:
    """Run the selected tests (all nine by default) on one sequence."""
    names = list(TESTS) if tests is None else list(tests)
    unknown = [t for t in names if t not in TESTS]
    if unknown:
        raise ValueError(f"unknown tests {unknown}; available: {list(TESTS)}")
    report = RandomnessReport()
    for t in names:
        report.add(TESTS[t](bits))
    return report


def evaluate_keys(keys: Sequence[np.ndarray], tests: Iterable[str] | None = None) -> RandomnessReport:
    """Run the suite over many keys.

    Every test except the rank test runs per key. The rank test needs far
    more bits than one key holds, so it runs on consecutive
    ``RANK_MIN_BITS``-bit chunks of the concatenated keys.
    """
    names = list(TESTS) if tests is None else list(tests)
    report = RandomnessReport()
    per_key = [t for t in names if t != "rank"]
    for key in keys:
        for t in per_key:
            report.add(TESTS[t](key))
    if "rank" in names:
        stream = np.concatenate([_bits(k) for k in keys]) if len(keys) else np.array([], int)
        chunks = stream.size // RANK_MIN_BITS
        if chunks == 0:
            report.add(_skip("rank", stream.size, RANK_MIN_BITS))
        for c in range(chunks):
            report.add(rank(stream[c * RANK_MIN_BITS:(c + 1) * RANK_MIN_BITS]))
    return report
