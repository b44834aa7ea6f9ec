"""Binned samples: bin schemes, CSV ingestion, built-in firm-size tables and truncation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

__all__ = [
    "BinScheme",
    "BinnedSample",
    "TruncatedSample",
    "parse_binned_csv",
    "to_csv",
    "fixture",
    "fixture_keys",
    "truncate",
    "empirical_survival",
    "CEMPRE_BOUNDARIES",
    "GROUPS",
    "YEARS",
]


class BinnedDataError(ValueError):
    """Malformed binned data or an invalid truncation request."""


@dataclass(frozen=True)
class BinScheme:
    """Lower bin boundaries ``b_1 < ... < b_m``; the last bin is ``[b_m, inf)``."""

    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(v) for v in self.boundaries)
        if len(b) < 2:
            raise BinnedDataError("a bin scheme needs at least 2 boundaries")
        if b[0] < 0:
            raise BinnedDataError(f"boundaries must be nonnegative, got {b[0]}")
        for lo, hi in zip(b, b[1:]):
            if hi <= lo:
                raise BinnedDataError(f"boundaries must be strictly increasing: {lo} then {hi}")
        object.__setattr__(self, "boundaries", b)

    def __len__(self) -> int:
        return len(self.boundaries)

    def index(self, s_min: int) -> int:
        try:
            return self.boundaries.index(int(s_min))
        except ValueError:
            raise BinnedDataError(
                f"s_min={s_min} is not a bin boundary {list(self.boundaries)}"
            ) from None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.boundaries, dtype=float)


@dataclass(frozen=True)
class BinnedSample:
    scheme: BinScheme
    counts: tuple[int, ...]
    label: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not isinstance(self.scheme, BinScheme):
            object.__setattr__(self, "scheme", BinScheme(tuple(self.scheme)))
        counts = []
        for c in self.counts:
            if isinstance(c, float) and not float(c).is_integer():
                raise BinnedDataError(f"counts must be integers, got {c}")
            counts.append(int(c))
        if len(counts) != len(self.scheme):
            raise BinnedDataError(
                f"{len(counts)} counts for {len(self.scheme)} bins"
            )
        if any(c < 0 for c in counts):
            raise BinnedDataError("counts must be nonnegative")
        if sum(counts) <= 0:
            raise BinnedDataError("total count must be positive")
        object.__setattr__(self, "counts", tuple(counts))
        object.__setattr__(self, "label", MappingProxyType(dict(self.label)))

    def __reduce__(self):
        # mappingproxy does not pickle; needed for process-pool workers
        return (BinnedSample, (self.scheme, self.counts, dict(self.label)))

    @property
    def boundaries(self) -> tuple[int, ...]:
        return self.scheme.boundaries

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def name(self) -> str:
        return self.label.get("name", "sample")

    def scaled(self, factor: int) -> "BinnedSample":
        """Every count multiplied by a positive integer ``factor``."""
        return BinnedSample(self.scheme, tuple(c * int(factor) for c in self.counts), self.label)


@dataclass(frozen=True)
class TruncatedSample:
    """The bins ``j..m`` of ``parent``, i.e. the part of the sample with ``S >= b_j``."""

    parent: BinnedSample
    j: int
    n: int

    @property
    def s_min(self) -> int:
        return self.parent.boundaries[self.j]

    @property
    def boundaries(self) -> np.ndarray:
        return self.parent.scheme.as_array()[self.j:]

    @property
    def counts(self) -> np.ndarray:
        return np.asarray(self.parent.counts[self.j:], dtype=float)

    @property
    def n_bins(self) -> int:
        return len(self.parent.counts) - self.j

    def with_counts(self, counts) -> "TruncatedSample":
        """Same scheme and ``s_min`` with the bins ``j..m`` replaced by ``counts``."""
        counts = [int(c) for c in counts]
        full = (0,) * self.j + tuple(counts)
        if sum(counts) <= 0:
            raise BinnedDataError("replacement counts must have a positive total")
        return TruncatedSample(BinnedSample(self.parent.scheme, full, self.parent.label), self.j, sum(counts))


def parse_binned_csv(text, label: Mapping[str, str] | None = None) -> BinnedSample:
    """Parse ``lower,count`` CSV text (or a readable file object) into a sample."""
    if not isinstance(text, str):
        text = text.read()
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise BinnedDataError("empty CSV")
    header = [h.strip().lower() for h in rows[0]]
    if header != ["lower", "count"]:
        raise BinnedDataError(f"expected header 'lower,count', got {','.join(rows[0])!r}")
    lowers, counts = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise BinnedDataError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            lowers.append(int(row[0].strip()))
            counts.append(int(row[1].strip()))
        except ValueError:
            raise BinnedDataError(f"line {lineno}: non-integer field in {row}") from None
    if len(lowers) < 2:
        raise BinnedDataError("need at least 2 bins")
    return BinnedSample(BinScheme(tuple(lowers)), tuple(counts), label or {})


def to_csv(sample: BinnedSample) -> str:
    lines = ["lower,count"]
    lines += [f"{b},{c}" for b, c in zip(sample.boundaries, sample.counts)]
    return "\n".join(lines) + "\n"


CEMPRE_BOUNDARIES = (0, 5, 10, 20, 30, 50, 100, 250, 500)
GROUPS = ("all", "agriculture", "industry", "services")
YEARS = ("1996", "2001", "2006old", "2006new", "2013", "2020")

# Number of firms by size bin, CEMPRE (IBGE). One tuple per bin, one column per year.
_TABLE1 = {
    "all": (
        (2616788, 3903486, 4730580, 3324519, 3985367, 4090186),
        (327372, 432626, 542426, 531612, 755609, 739242),
        (141337, 193133, 265581, 261271, 379902, 358736),
        (40693, 55032, 69486, 69433, 102152, 93372),
        (31260, 39498, 50276, 50222, 73368, 65053),
        (23133, 27102, 33294, 33269, 47651, 43294),
        (15244, 16732, 19683, 19664, 27132, 24341),
        (5713, 6283, 7807, 7801, 10429, 9739),
        (5181, 5933, 7793, 7787, 10624, 10128),
    ),
    "agriculture": (
        (16419, 23666, 38961, 21850, 93237, 89402),
        (3436, 3737, 4681, 4249, 5870, 6638),
        (1909, 2160, 2948, 2740, 3686, 3657),
        (735, 814, 980, 977, 1105, 1136),
        (583, 717, 778, 760, 863, 811),
        (447, 538, 585, 599, 637, 681),
        (247, 310, 404, 402, 398, 407),
        (103, 132, 121, 125, 157, 160),
        (88, 124, 127, 127, 127, 130),
    ),
    "industry": (
        (315907, 413192, 474964, 314128, 433166, 472907),
        (61262, 73224, 83092, 82158, 118577, 107997),
        (36803, 48727, 59429, 59166, 79931, 69686),
        (13656, 18474, 21407, 21664, 29726, 24498),
        (11487, 14795, 17571, 17588, 23142, 17941),
        (9045, 10906, 13200, 13231, 17366, 13127),
        (5759, 6160, 7308, 7295, 9836, 7399),
        (2089, 1942, 2438, 2423, 3228, 2596),
        (1726, 1622, 2034, 2038, 2902, 2283),
    ),
    "services": (
        (2284462, 3466628, 4216655, 2988541, 3458964, 3527877),
        (262674, 355665, 454653, 445205, 631162, 624607),
        (102625, 142246, 203204, 199365, 296285, 285393),
        (26302, 35744, 47099, 46792, 71321, 67738),
        (19190, 23986, 31927, 31874, 49363, 46301),
        (13641, 15658, 19509, 19439, 29648, 29486),
        (9238, 10262, 11971, 11967, 16898, 16535),
        (3521, 4209, 5248, 5253, 7044, 6983),
        (3367, 4187, 5632, 5622, 7595, 7715),
    ),
}

# Printed "Total" row of each column, kept separately as a consistency check.
TABLE1_TOTALS = {
    "all": (3206721, 4679825, 5726926, 4305578, 5392234, 5434091),
    "agriculture": (23967, 32198, 49585, 31829, 106080, 103022),
    "industry": (457734, 589042, 681443, 519691, 717874, 718434),
    "services": (2725020, 4058585, 4995898, 3754058, 4568280, 4612635),
}


def fixture(group: str, year: str | int) -> BinnedSample:
    """Return one column of the CEMPRE firm-size table.

    ``year`` is one of 1996, 2001, 2006old, 2006new, 2013, 2020. The two 2006
    columns come from the databases before and after the 2006 methodology break.
    """
    year = str(year)
    if group not in _TABLE1:
        raise BinnedDataError(f"unknown industry group {group!r}; choose from {GROUPS}")
    if year not in YEARS:
        raise BinnedDataError(f"unknown year {year!r}; choose from {YEARS}")
    col = YEARS.index(year)
    counts = tuple(row[col] for row in _TABLE1[group])
    database = "1996-2006" if col < 3 else "2006-2020"
    label = {"name": f"{group}:{year}", "group": group, "year": year,
             "source": f"CEMPRE {database} database"}
    return BinnedSample(BinScheme(CEMPRE_BOUNDARIES), counts, label)


def fixture_keys() -> list[str]:
    return [f"{g}:{y}" for g in GROUPS for y in YEARS]


def fixture_from_selector(selector: str) -> BinnedSample:
    """``'group:year'`` -> sample, as used by ``--fixture`` on the command line."""
    group, sep, year = selector.partition(":")
    if not sep:
        raise BinnedDataError(f"fixture selector must look like 'group:year', got {selector!r}")
    return fixture(group, year)


def truncate(sample: BinnedSample, s_min: int, min_bins: int = 2) -> TruncatedSample:
    j = sample.scheme.index(s_min)
    remaining = len(sample.counts) - j
    if remaining < min_bins:
        raise BinnedDataError(
            f"s_min={s_min} leaves {remaining} bin(s); at least {min_bins} required"
        )
    n = sum(sample.counts[j:])
    if n <= 0:
        raise BinnedDataError(f"no observations at or above s_min={s_min}")
    return TruncatedSample(sample, j, n)


def empirical_survival(t: TruncatedSample) -> list[tuple[int, float]]:
    """Pairs ``(b_i, P(S >= b_i))`` for ``i = j..m``; the first probability is 1."""
    counts = t.parent.counts[t.j:]
    out = []
    tail = t.n
    for b, h in zip(t.parent.boundaries[t.j:], counts):
        out.append((b, tail / t.n))
        tail -= h
    return out


def survival_array(counts: np.ndarray) -> np.ndarray:
    """Empirical survival at each bin's lower boundary for rows of bin counts."""
    counts = np.asarray(counts, dtype=float)
    tails = np.cumsum(counts[..., ::-1], axis=-1)[..., ::-1]
    return tails / tails[..., :1]
