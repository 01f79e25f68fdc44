"""
Scaling Module - Scaling factors tau_n for every normalization regime
Theoretical factors come from kernel increment variances; the empirical
tilde factor is the root-mean-square of observed increments.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.constants import MIN_INCREMENTS
from exceptions import DegenerateVariance, InsufficientData, InvalidPartition, RegimeMismatch
from kernel import CoreFamily, KernelSpec, increment_covariance
from simulate import PathBundle

logger = logging.getLogger(__name__)


class Regime(str, Enum):
    CASE_I = "CaseI"
    CASE_I_TRIPLE = "CaseI-triple"
    PARTITION = "Partition"
    CASE_II_BAR = "CaseII-bar"
    CASE_II_TILDE_THEORETICAL = "CaseII-tilde-theoretical"
    CASE_II_TILDE_EMPIRICAL = "CaseII-tilde-empirical"


class TauMode(str, Enum):
    SUM_DIAGONAL = "SumDiagonal"
    MAX_OVER_R = "MaxOverR"


@dataclass(frozen=True)
class ScalingFactors:
    """
    Scaling factors of one regime at resolution n

    Attributes:
        regime: Regime tag
        n: Resolution
        values: One positive value per index
        index: 1-based index labels, (k,) per component, (k, r) per kernel, (h,) per block
        provenance: "kernel-derived" or "data-derived", with the tau_bar mode when relevant
        component_map: For partitions, the block index (0-based) of every component
        params: Inputs needed to re-evaluate the regime at another resolution
    """
    regime: Regime
    n: int
    values: np.ndarray
    index: Tuple[Tuple[int, ...], ...]
    provenance: str
    component_map: Optional[Tuple[int, ...]] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.index),):
            raise ValueError(f"{len(self.index)} labels for {values.shape} scaling values")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise DegenerateVariance(f"Scaling factors must be positive, got {values}")
        object.__setattr__(self, "values", values)

    def component_values(self, p: int) -> np.ndarray:
        """Per-component factor tau^(k), k = 1..p"""
        if self.regime == Regime.CASE_I_TRIPLE:
            raise RegimeMismatch("Case I triple factors are indexed by (k, r), not by component")
        if self.component_map is not None:
            return self.values[list(self.component_map)]
        if len(self.values) != p:
            raise RegimeMismatch(f"Scaling holds {len(self.values)} factors for {p} components")
        return self.values

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime.value,
            "n": self.n,
            "values": self.values.tolist(),
            "index": [list(i) for i in self.index],
            "provenance": self.provenance,
            "component_map": None if self.component_map is None else list(self.component_map),
            "params": self.params,
        }


def kernel_variance(spec: KernelSpec, k: int, r: int, n: int) -> float:
    """E[(Delta_1 G^(k,r;m))^2] for one kernel cell (0-based), zero for an absent cell"""
    g = spec.kernel(k, r)
    return 0.0 if g is None else increment_covariance(g, g, n, 0)


def _component_covariance(spec: KernelSpec, n: int, i: int, j: int) -> float:
    total = 0.0
    for l in range(spec.p):
        gi, gj = spec.kernel(i, l), spec.kernel(j, l)
        if gi is not None and gj is not None:
            total += increment_covariance(gi, gj, n, 0)
    return total


def tau_case1(spec: KernelSpec, n: int, per_kernel: bool = False) -> ScalingFactors:
    """
    Case I factors tau^(j) = sqrt(E[(Delta_1 G^(j))^2]), or per kernel tau^(k,r) when per_kernel

    Per-kernel factors are indexed only by the cells that hold a kernel.

    Raises:
        DegenerateVariance: if any factor is zero
    """
    p = spec.p
    if per_kernel:
        index = tuple((k + 1, r + 1) for k in range(p) for r in range(p) if spec.kernel(k, r) is not None)
        values = [math.sqrt(kernel_variance(spec, k - 1, r - 1, n)) for k, r in index]
        return ScalingFactors(Regime.CASE_I_TRIPLE, n, np.array(values), index, "kernel-derived")
    values = [math.sqrt(max(_component_covariance(spec, n, j, j), 0.0)) for j in range(p)]
    return ScalingFactors(Regime.CASE_I, n, np.array(values), tuple((j + 1,) for j in range(p)), "kernel-derived")


def tau_partition(spec: KernelSpec, n: int, partition: Sequence[Sequence[int]]) -> ScalingFactors:
    """
    Block factors tau^(alpha_h) = sqrt(E[(sum_{i in block} Delta_1 G^(i))^2])

    Args:
        spec: Kernel grid
        n: Resolution
        partition: Blocks of 1-based component indices, disjoint and covering 1..p
    """
    p = spec.p
    blocks = [sorted(int(i) for i in block) for block in partition]
    flat = [i for block in blocks for i in block]
    if any(not block for block in blocks):
        raise InvalidPartition("Partition blocks must be non-empty")
    if sorted(flat) != list(range(1, p + 1)):
        raise InvalidPartition(f"Partition {blocks} does not split 1..{p} into disjoint blocks")
    values = []
    mapping = [0] * p
    for h, block in enumerate(blocks):
        var = sum(_component_covariance(spec, n, i - 1, j - 1) for i in block for j in block)
        values.append(math.sqrt(max(var, 0.0)))
        for i in block:
            mapping[i - 1] = h
    return ScalingFactors(Regime.PARTITION, n, np.array(values), tuple((h + 1,) for h in range(len(blocks))),
                          "kernel-derived", component_map=tuple(mapping), params={"partition": blocks})


def tau_bar(spec: KernelSpec, n: int, mode: Union[TauMode, str] = TauMode.SUM_DIAGONAL) -> ScalingFactors:
    """
    Scenario-1 factors tau_bar^(k) under independent driving measures

    SumDiagonal: sqrt(sum_r E[(Delta_1 G^(k,r,r))^2]); MaxOverR: max_r sqrt(E[(Delta_1 G^(k,r,r))^2])
    """
    mode = TauMode(mode)
    p = spec.p
    values = []
    for k in range(p):
        per_r = [kernel_variance(spec, k, r, n) for r in range(p)]
        if mode == TauMode.SUM_DIAGONAL:
            values.append(math.sqrt(sum(per_r)))
        else:
            values.append(math.sqrt(max(per_r)))
    return ScalingFactors(Regime.CASE_II_BAR, n, np.array(values), tuple((k + 1,) for k in range(p)),
                          f"kernel-derived ({mode.value})", params={"mode": mode.value})


def tau_tilde_theoretical(spec: KernelSpec, second_moments, n: int) -> ScalingFactors:
    """
    tau_tilde^(k) = sqrt(sum_m E[(Delta_1 G^(k,m))^2] E[(sigma^(k,m))^2])

    Args:
        spec: Kernel grid
        second_moments: p x p matrix (or scalar) of E[(sigma^(k,m))^2]
        n: Resolution
    """
    p = spec.p
    moments = np.broadcast_to(np.asarray(second_moments, dtype=float), (p, p))
    values = [math.sqrt(sum(kernel_variance(spec, k, m, n) * moments[k, m] for m in range(p))) for k in range(p)]
    return ScalingFactors(Regime.CASE_II_TILDE_THEORETICAL, n, np.array(values),
                          tuple((k + 1,) for k in range(p)), "kernel-derived", params={"second_moments": moments.tolist()})


def tau_tilde_empirical(data: Union[PathBundle, Sequence[PathBundle]]) -> ScalingFactors:
    """
    Root-mean-square of observed increments per component

    A list of bundles pools increments across paths.

    Raises:
        InsufficientData: with fewer than 30 increments
    """
    bundles: List[PathBundle] = [data] if isinstance(data, PathBundle) else list(data)
    if not bundles:
        raise InsufficientData("No paths supplied")
    increments = np.vstack([b.increments for b in bundles])
    if increments.shape[0] < MIN_INCREMENTS:
        raise InsufficientData(f"At least {MIN_INCREMENTS} increments required, got {increments.shape[0]}")
    values = np.sqrt(np.mean(increments ** 2, axis=0))
    p = increments.shape[1]
    return ScalingFactors(Regime.CASE_II_TILDE_EMPIRICAL, bundles[0].grid.n, values,
                          tuple((k + 1,) for k in range(p)), "data-derived")


def family_normalization(family: CoreFamily, scaling: ScalingFactors) -> np.ndarray:
    """
    Per-member factor of a core family under a regime

    Members (k,) and (k, m) use the component factor; triples (k, r, m) use
    tau^(k,r) in Case I triple and the component factor otherwise.
    """
    p = family.p
    if scaling.regime == Regime.CASE_I_TRIPLE:
        lookup = dict(zip(scaling.index, scaling.values))
        if family.target != "triple":
            raise RegimeMismatch("Case I triple factors need the triple family")
        # members of absent cells are identically zero
        return np.array([lookup.get((k, r), 1.0) for k, r, _ in family.labels])
    comp = scaling.component_values(p)
    return np.array([comp[label[0] - 1] for label in family.labels])


def tau_for_regime(spec: KernelSpec, n: int, regime: Union[Regime, str], mode: Union[TauMode, str] = TauMode.SUM_DIAGONAL,
                   second_moments=None, partition: Optional[Sequence[Sequence[int]]] = None,
                   data: Optional[Sequence[PathBundle]] = None) -> ScalingFactors:
    """Dispatch on a regime tag, as selected by --scaling"""
    regime = Regime(regime)
    if regime == Regime.CASE_I:
        return tau_case1(spec, n)
    if regime == Regime.CASE_I_TRIPLE:
        return tau_case1(spec, n, per_kernel=True)
    if regime == Regime.PARTITION:
        if partition is None:
            raise InvalidPartition("Partition regime needs a partition")
        return tau_partition(spec, n, partition)
    if regime == Regime.CASE_II_BAR:
        return tau_bar(spec, n, mode)
    if regime == Regime.CASE_II_TILDE_THEORETICAL:
        return tau_tilde_theoretical(spec, 1.0 if second_moments is None else second_moments, n)
    if data is None:
        raise InsufficientData("Empirical tilde scaling needs observed paths")
    return tau_tilde_empirical(data)


def tau_at(spec: KernelSpec, scaling: ScalingFactors, n: int) -> ScalingFactors:
    """Re-evaluate a kernel-derived regime at another resolution"""
    if scaling.provenance == "data-derived":
        raise RegimeMismatch("Data-derived scaling cannot be re-evaluated at another resolution")
    return tau_for_regime(spec, n, scaling.regime, mode=scaling.params.get("mode", TauMode.SUM_DIAGONAL),
                          second_moments=scaling.params.get("second_moments"),
                          partition=scaling.params.get("partition"))
