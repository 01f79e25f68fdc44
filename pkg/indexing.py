"""
Indexing Module - Maps between multi-indices and flat matrix coordinates
Used by the asymptotic covariance matrices, including their vech reduction.
All indices are 1-based, matching the labels written into serialized matrices.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

from exceptions import OutOfRange

SCHEMES = ("PairSquare", "CaseI-Full", "CaseI-Vech", "Scenario2-Full", "Scenario2-Vech")


def _check_p(p: int):
    if p < 1:
        raise OutOfRange(f"Dimension must be positive, got p={p}")


def _check_range(value: int, upper: int, name: str):
    if not 1 <= value <= upper:
        raise OutOfRange(f"{name}={value} outside 1..{upper}")


def vech_size(p: int) -> int:
    return p * (p + 1) // 2


@dataclass(frozen=True)
class IndexMapDescriptor:
    """
    Row/column meaning of a serialized matrix

    Attributes:
        p: Component dimension
        scheme: One of SCHEMES
    """
    p: int
    scheme: str

    def __post_init__(self):
        _check_p(self.p)
        if self.scheme not in SCHEMES:
            raise ValueError(f"Unknown index scheme '{self.scheme}', expected one of {SCHEMES}")

    @property
    def flat_size(self) -> int:
        p = self.p
        return {
            "PairSquare": p ** 2,
            "CaseI-Full": p ** 6,
            "CaseI-Vech": p ** 4 * vech_size(p),
            "Scenario2-Full": p ** 4,
            "Scenario2-Vech": p ** 2 * vech_size(p),
        }[self.scheme]

    @property
    def is_vech(self) -> bool:
        return self.scheme.endswith("Vech")

    @property
    def statistic_size(self) -> int:
        """Number of statistic rows: p^2 for full schemes, p(p+1)/2 for vech"""
        return vech_size(self.p) if self.is_vech else self.p ** 2

    def statistic_labels(self) -> List[Tuple[int, int]]:
        if self.is_vech:
            return [vech_chi_xi(i) for i in range(1, vech_size(self.p) + 1)]
        return [pair_from_flat(i, self.p) for i in range(1, self.p ** 2 + 1)]

    def labels(self) -> List[Tuple[int, ...]]:
        """Multi-index of every flat coordinate 1..flat_size"""
        p = self.p
        if self.scheme == "PairSquare":
            return [pair_from_flat(z, p) for z in range(1, p ** 2 + 1)]
        if self.scheme == "CaseI-Full":
            return [case1_flat_map(z, p) for z in range(1, p ** 6 + 1)]
        if self.scheme == "CaseI-Vech":
            return [case1_vech_flat_map(z, p) for z in range(1, self.flat_size + 1)]
        if self.scheme == "Scenario2-Full":
            return [scenario2_flat_map(z, p) for z in range(1, p ** 4 + 1)]
        return [scenario2_vech_flat_map(z, p) for z in range(1, self.flat_size + 1)]

    def to_dict(self) -> Dict[str, Any]:
        return {"p": self.p, "scheme": self.scheme, "flat_size": self.flat_size,
                "ordering": "lexicographic", "base": 1}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "IndexMapDescriptor":
        return cls(p=int(data["p"]), scheme=str(data["scheme"]))


def pair_from_flat(i: int, p: int) -> Tuple[int, int]:
    """Flat index 1..p^2 -> (floor((i-1)/p) + 1, i - p floor((i-1)/p))"""
    _check_p(p)
    _check_range(i, p * p, "i")
    q = (i - 1) // p
    return q + 1, i - p * q


def flat_from_pair(x: int, y: int, p: int) -> int:
    _check_range(x, p, "x")
    _check_range(y, p, "y")
    return (x - 1) * p + y


def nu_enumerate(p: int) -> List[Tuple[int, int, int, int]]:
    """All quadruples (r, m, q, w) in 1..p, lexicographic ascending"""
    _check_p(p)
    return list(itertools.product(range(1, p + 1), repeat=4))


def mu_enumerate(p: int) -> List[Tuple[int, int]]:
    """All pairs (m, w) in 1..p, lexicographic ascending"""
    _check_p(p)
    return list(itertools.product(range(1, p + 1), repeat=2))


def nu_index(quad: Tuple[int, int, int, int], p: int) -> int:
    """Position s (1-based) of a quadruple in nu_enumerate(p)"""
    s = 0
    for v in quad:
        _check_range(v, p, "nu entry")
        s = s * p + (v - 1)
    return s + 1


def case1_flat_map(z: int, p: int) -> Tuple[int, int, int, int, int, int]:
    """
    Flat index 1..p^6 -> (r, m, q, w, k, l)

    Blocks of p^4 consecutive indices share (k, l); within a block the
    offset selects nu_s, the s-th quadruple of nu_enumerate.
    """
    _check_p(p)
    p4 = p ** 4
    _check_range(z, p ** 6, "z")
    block = (z - 1) // p4
    r, m, q, w = nu_enumerate(p)[z - block * p4 - 1]
    k = block // p + 1
    l = block + 1 - p * (block // p)
    return r, m, q, w, k, l


def case1_flat_index(r: int, m: int, q: int, w: int, k: int, l: int, p: int) -> int:
    """Inverse of case1_flat_map"""
    return (flat_from_pair(k, l, p) - 1) * p ** 4 + nu_index((r, m, q, w), p)


def vech_chi_xi(i: int) -> Tuple[int, int]:
    """
    i-th term of (1,1), (2,1), (2,2), (3,1), ... as (chi(i), xi(i))

    Integer square roots keep perfect-square boundaries exact.
    """
    if i < 1:
        raise OutOfRange(f"vech position must be positive, got {i}")
    t = (math.isqrt(8 * i - 7) - 1) // 2
    return t + 1, i - t * (t + 1) // 2


def vech_index(k: int, l: int) -> int:
    """Inverse of vech_chi_xi: i = k(k-1)/2 + l"""
    if l < 1 or k < 1:
        raise OutOfRange(f"vech indices must be positive, got ({k}, {l})")
    if l > k:
        raise OutOfRange(f"vech requires l <= k, got ({k}, {l})")
    return k * (k - 1) // 2 + l


def case1_vech_flat_map(z: int, p: int) -> Tuple[int, int, int, int, int, int]:
    """Flat index 1..p^5 (p+1)/2 -> (r, m, q, w, k, l) with l <= k"""
    _check_p(p)
    p4 = p ** 4
    _check_range(z, p4 * vech_size(p), "z")
    block = (z - 1) // p4
    r, m, q, w = nu_enumerate(p)[z - block * p4 - 1]
    k, l = vech_chi_xi(block + 1)
    return r, m, q, w, k, l


def scenario2_flat_map(z: int, p: int) -> Tuple[int, int, int, int]:
    """Flat index 1..p^4 -> (m, w, k, l); blocks of p^2 share (k, l)"""
    _check_p(p)
    p2 = p * p
    _check_range(z, p2 * p2, "z")
    block = (z - 1) // p2
    m, w = mu_enumerate(p)[z - block * p2 - 1]
    k = block // p + 1
    l = block + 1 - p * (block // p)
    return m, w, k, l


def scenario2_vech_flat_map(z: int, p: int) -> Tuple[int, int, int, int]:
    """Flat index 1..p^3 (p+1)/2 -> (m, w, k, l) with l <= k"""
    _check_p(p)
    p2 = p * p
    _check_range(z, p2 * vech_size(p), "z")
    block = (z - 1) // p2
    m, w = mu_enumerate(p)[z - block * p2 - 1]
    k, l = vech_chi_xi(block + 1)
    return m, w, k, l
