"""
Asymptotics Module - Limit covariance matrices of the realised-covariation CLTs
Builds D for the Gaussian core, the Case I BSS triple family and the second
scenario pair family, the volatility block matrices V_s, the covariance
int_0^t V_s D V_s^T ds of the centered statistic, and the delta-method
covariances of the feasible ratio statistics.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate, linalg

from config.constants import D_CONVERGENCE_RTOL, D_N_SEQUENCE, MAX_D_SIZE, MAX_LAGS, PSD_TOL
from exceptions import DegenerateR, DimensionMismatch, NotConverged, NotPSD, SizeCap
from indexing import (
    IndexMapDescriptor,
    case1_flat_map,
    case1_vech_flat_map,
    flat_from_pair,
    pair_from_flat,
    scenario2_flat_map,
    scenario2_vech_flat_map,
    vech_chi_xi,
    vech_size,
)
from kernel import CoreFamily, KernelSpec, check_assumption_squared_correlations, core_family, correlation_table
from scaling import Regime, TauMode, family_normalization, tau_for_regime

logger = logging.getLogger(__name__)


@dataclass
class DMatrix:
    """
    Limit covariance D of the Gaussian-member statistic

    Attributes:
        descriptor: Row/column meaning
        values: Square matrix of size descriptor.flat_size
        diagnostics: n-sequence, lag truncation, last relative delta, PSD repair
        regime: Normalization regime of the underlying correlations
    """
    descriptor: IndexMapDescriptor
    values: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    regime: str = Regime.CASE_I.value

    def __post_init__(self):
        size = self.descriptor.flat_size
        if self.values.shape != (size, size):
            raise DimensionMismatch(f"D must be {size}x{size} for {self.descriptor.scheme}, got {self.values.shape}")

    def header(self) -> Dict[str, Any]:
        return {"descriptor": self.descriptor.to_dict(), "diagnostics": self.diagnostics, "regime": self.regime}


@dataclass
class VMatrix:
    """Volatility block matrix V_s: statistic rows x flat columns"""
    descriptor: IndexMapDescriptor
    values: np.ndarray


# ---------------------------------------------------------------------------
# Member-pair maps
# ---------------------------------------------------------------------------

def _member_pairs(family: CoreFamily, descriptor: IndexMapDescriptor) -> Tuple[np.ndarray, np.ndarray]:
    """Member indices (a, b) of the statistic entry behind every flat coordinate"""
    p = descriptor.p
    A, B = [], []
    for z in range(1, descriptor.flat_size + 1):
        if descriptor.scheme == "PairSquare":
            x, y = pair_from_flat(z, p)
            a, b = (x,), (y,)
        elif descriptor.scheme in ("CaseI-Full", "CaseI-Vech"):
            fn = case1_flat_map if descriptor.scheme == "CaseI-Full" else case1_vech_flat_map
            r, m, q, w, k, l = fn(z, p)
            a, b = (k, r, m), (l, q, w)
        else:
            fn = scenario2_flat_map if descriptor.scheme == "Scenario2-Full" else scenario2_vech_flat_map
            m, w, k, l = fn(z, p)
            a, b = (k, m), (l, w)
        A.append(family.index(a))
        B.append(family.index(b))
    return np.array(A), np.array(B)


def _assemble(rho: np.ndarray, n: int, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    D[(a,b),(c,e)] = rho_ac(0) rho_be(0) + rho_ae(0) rho_bc(0)
                     + sum_{d=1}^{K} (n-d)/n [rho_ac rho_be + rho_ae rho_bc + rho_ca rho_eb + rho_ea rho_cb](d)

    rho has shape (P, P, K+1) with rho[a, c, d] = E[Delta_1 G^a Delta_{1+d} G^c] / (tau_a tau_c).
    """
    P, _, lags = rho.shape
    flat = rho.reshape(P * P, lags)
    w = (n - np.arange(1, lags)) / n
    tail = flat[:, 1:]
    M = (tail * w[None, :]) @ tail.T
    M0 = np.outer(flat[:, 0], flat[:, 0])

    ac = A[:, None] * P + A[None, :]
    be = B[:, None] * P + B[None, :]
    ae = A[:, None] * P + B[None, :]
    bc = B[:, None] * P + A[None, :]
    D = (M0[ac, be] + M0[ae, bc] + M[ac, be] + M[ae, bc]
         + M[ac.T, be.T] + M[bc.T, ae.T])
    return 0.5 * (D + D.T)


def d_entry_direct(rho: np.ndarray, n: int, a: int, b: int, c: int, e: int) -> float:
    """One D entry by direct summation over signed lags -K..K, entry by entry"""
    lags = rho.shape[2]
    total = 0.0

    def r(x: int, y: int, d: int) -> float:
        return rho[x, y, d] if d >= 0 else rho[y, x, -d]

    for d in range(-(lags - 1), lags):
        weight = (n - abs(d)) / n
        total += weight * (r(a, c, d) * r(b, e, d) + r(a, e, d) * r(b, c, d))
    return total


def _repair_psd(values: np.ndarray, diagnostics: Dict[str, Any]) -> np.ndarray:
    sym = 0.5 * (values + values.T)
    eigval, eigvec = linalg.eigh(sym)
    lowest = float(eigval[0])
    diagnostics["min_eigenvalue"] = lowest
    if lowest < -PSD_TOL:
        raise NotPSD(f"D has eigenvalue {lowest:.3e} below -{PSD_TOL:g}")
    if lowest < 0.0:
        logger.warning("Clipping D eigenvalues down to %.3e", lowest)
        diagnostics["psd_repair"] = lowest
        sym = (eigvec * np.maximum(eigval, 0.0)) @ eigvec.T
        sym = 0.5 * (sym + sym.T)
    return sym


def _compute_d(
    spec: KernelSpec,
    target: str,
    descriptor: IndexMapDescriptor,
    normalizer: Callable[[CoreFamily, int], Optional[np.ndarray]],
    n_sequence: Sequence[int],
    K: Optional[int],
    regime: str,
    method: str,
    check_convergence: bool,
    check_assumptions: bool,
) -> DMatrix:
    if descriptor.flat_size > MAX_D_SIZE:
        raise SizeCap(f"{descriptor.scheme} D of size {descriptor.flat_size} exceeds {MAX_D_SIZE}; use the vech form")
    family = core_family(spec, target)
    A, B = _member_pairs(family, descriptor)
    results: List[np.ndarray] = []
    lags_used: List[int] = []
    table = None
    for n in n_sequence:
        lag_cap = min(n - 1, MAX_LAGS if K is None else K)
        table = correlation_table(family, n, lag_cap, normalization=normalizer(family, n), regime=regime, method=method)
        results.append(_assemble(table.as_array(), n, A, B))
        lags_used.append(lag_cap)
        logger.debug("D[%s] at n=%d, K=%d: max entry %.6g", descriptor.scheme, n, lag_cap, np.max(np.abs(results[-1])))

    diagnostics: Dict[str, Any] = {"n_sequence": [int(n) for n in n_sequence], "K": lags_used, "last_delta": None}
    if len(results) > 1:
        scale = max(float(np.max(np.abs(results[-1]))), 1e-300)
        delta = float(np.max(np.abs(results[-1] - results[-2]))) / scale
        diagnostics["last_delta"] = delta
        if check_convergence and delta > D_CONVERGENCE_RTOL:
            raise NotConverged(f"D changed by {delta:.3e} (relative) between n={n_sequence[-2]} and n={n_sequence[-1]}")
    if check_assumptions and table is not None and table.max_lag >= 10:
        audit = check_assumption_squared_correlations(table, table.max_lag)
        diagnostics["assumption_verdict"] = audit["verdict"]

    values = _repair_psd(results[-1], diagnostics)
    return DMatrix(descriptor, values, diagnostics, regime)


def _normalizer_for(spec: KernelSpec, regime: Regime, mode: TauMode = TauMode.SUM_DIAGONAL,
                    second_moments=None, partition=None):
    def normalizer(family: CoreFamily, n: int) -> Optional[np.ndarray]:
        if regime == Regime.CASE_I and family.target == "component":
            return None
        scaling = tau_for_regime(spec, n, regime, mode=mode, second_moments=second_moments, partition=partition)
        return family_normalization(family, scaling)
    return normalizer


def D_gaussian(
    spec: KernelSpec,
    regime: Union[Regime, str] = Regime.CASE_I,
    n_sequence: Sequence[int] = D_N_SEQUENCE,
    K: Optional[int] = None,
    partition: Optional[Sequence[Sequence[int]]] = None,
    method: str = "auto",
    check_convergence: bool = True,
    check_assumptions: bool = False,
) -> DMatrix:
    """
    D for the p^2 statistic of the Gaussian core (PairSquare indexing)

    Case I normalizes each component by its own increment deviation; the
    partition regime by its block factor.

    Raises:
        NotConverged: if the last two n values disagree beyond tolerance
    """
    regime = Regime(regime)
    descriptor = IndexMapDescriptor(spec.p, "PairSquare")
    normalizer = _normalizer_for(spec, regime, partition=partition)
    return _compute_d(spec, "component", descriptor, normalizer, n_sequence, K, regime.value, method,
                      check_convergence, check_assumptions)


def D_case1_bss(
    spec: KernelSpec,
    n_sequence: Sequence[int] = D_N_SEQUENCE,
    K: Optional[int] = None,
    vech: bool = False,
    regime: Union[Regime, str] = Regime.CASE_I,
    mode: Union[TauMode, str] = TauMode.SUM_DIAGONAL,
    method: str = "auto",
    check_convergence: bool = True,
    check_assumptions: bool = False,
) -> DMatrix:
    """
    D over the triple family G^(k,r;m) for the Y variant

    Columns follow case1_flat_map (or its vech restriction l <= k). Triples are
    normalized by the component factor of k, or by tau^(k,r) in the triple regime.

    Raises:
        SizeCap: for the full form beyond p = 2 and the vech form beyond p = 3
    """
    regime = Regime(regime)
    descriptor = IndexMapDescriptor(spec.p, "CaseI-Vech" if vech else "CaseI-Full")
    normalizer = _normalizer_for(spec, regime, mode=TauMode(mode))
    return _compute_d(spec, "triple", descriptor, normalizer, n_sequence, K, regime.value, method,
                      check_convergence, check_assumptions)


def D_scenario2(
    spec: KernelSpec,
    n_sequence: Sequence[int] = D_N_SEQUENCE,
    K: Optional[int] = None,
    vech: bool = False,
    second_moments=1.0,
    method: str = "auto",
    check_convergence: bool = True,
    check_assumptions: bool = False,
) -> DMatrix:
    """D over the pair family G^(k,m) for the X variant, normalized by tau_tilde"""
    descriptor = IndexMapDescriptor(spec.p, "Scenario2-Vech" if vech else "Scenario2-Full")
    normalizer = _normalizer_for(spec, Regime.CASE_II_TILDE_THEORETICAL, second_moments=second_moments)
    return _compute_d(spec, "pair", descriptor, normalizer, n_sequence, K, Regime.CASE_II_TILDE_THEORETICAL.value,
                      method, check_convergence, check_assumptions)


# ---------------------------------------------------------------------------
# V matrices and statistic covariance
# ---------------------------------------------------------------------------

def _statistic_rows(descriptor: IndexMapDescriptor) -> List[Tuple[int, int]]:
    return descriptor.statistic_labels()


def V_matrix(sigma: np.ndarray, descriptor: IndexMapDescriptor) -> VMatrix:
    """
    Block matrix of volatility products at one time

    Row (k, l) carries sigma^(r,m) sigma^(q,w) (Case I) or sigma^(k,m) sigma^(l,w)
    (second scenario) in the columns whose flat index maps to (k, l), in nu/mu order.
    PairSquare is the identity.
    """
    p = descriptor.p
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p, p):
        raise DimensionMismatch(f"Volatility must be {p}x{p}, got {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise DimensionMismatch("Volatility values must be finite")
    if descriptor.scheme == "PairSquare":
        return VMatrix(descriptor, np.eye(p * p))
    rows = _statistic_rows(descriptor)
    row_of = {pair: i for i, pair in enumerate(rows)}
    out = np.zeros((len(rows), descriptor.flat_size))
    for z, label in enumerate(descriptor.labels()):
        if descriptor.scheme.startswith("CaseI"):
            r, m, q, w, k, l = label
            value = sigma[r - 1, m - 1] * sigma[q - 1, w - 1]
        else:
            m, w, k, l = label
            value = sigma[k - 1, m - 1] * sigma[l - 1, w - 1]
        out[row_of[(k, l)], z] = value
    return VMatrix(descriptor, out)


def _vech_selection(descriptor: IndexMapDescriptor) -> np.ndarray:
    """Rows of a full statistic that make up its vech, in vech order"""
    if descriptor.is_vech:
        return np.arange(vech_size(descriptor.p))
    p = descriptor.p
    return np.array([flat_from_pair(k, l, p) - 1 for k, l in (vech_chi_xi(i) for i in range(1, vech_size(p) + 1))])


def statistic_covariance(D: DMatrix, volatility, t: float, dt: Optional[float] = None) -> np.ndarray:
    """
    vech x vech covariance int_0^t V_s D V_s^T ds of the CLT limit at time t

    Args:
        D: Limit matrix
        volatility: p x p constants, or an (S, p, p) path on s = 0, dt, 2 dt, ...
        t: Time
        dt: Spacing of the volatility path

    Raises:
        DimensionMismatch: for incompatible shapes
    """
    p = D.descriptor.p
    sel = _vech_selection(D.descriptor)
    sigma = np.asarray(volatility, dtype=float)
    if sigma.shape == (p, p):
        V = V_matrix(sigma, D.descriptor).values[sel]
        out = t * (V @ D.values @ V.T)
    else:
        if sigma.ndim != 3 or sigma.shape[1:] != (p, p):
            raise DimensionMismatch(f"Volatility path must be (S, {p}, {p}), got {sigma.shape}")
        if dt is None:
            raise DimensionMismatch("A volatility path needs its spacing dt")
        last = int(np.floor(t / dt + 1e-9))
        if last >= sigma.shape[0]:
            raise DimensionMismatch(f"Volatility path ends before t={t}")
        stack = np.stack([V_matrix(sigma[s], D.descriptor).values[sel] for s in range(last + 1)])
        integrand = stack @ D.values[None, :, :] @ np.transpose(stack, (0, 2, 1))
        out = integrate.trapezoid(integrand, dx=dt, axis=0) if last > 0 else np.zeros(integrand.shape[1:])
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# Ratio statistics
# ---------------------------------------------------------------------------

@dataclass
class RatioLimitCovariance:
    """
    Covariance of the sqrt(n)-centered ratio statistics, indexed by vech pairs

    provenance[i][j] is "stated" for an entry's own variance and "model-derived"
    for cross terms between different (k, l).
    """
    kind: str
    pairs: List[Tuple[int, int]]
    matrix: np.ndarray
    provenance: List[List[str]]
    formula_hash: str

    def variance(self, k: int, l: int) -> float:
        if l > k:
            k, l = l, k
        i = self.pairs.index((k, l))
        return float(self.matrix[i, i])


def _formula_hash(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]


def ratio_limit_covariance(
    sigma_t: np.ndarray,
    R_t: np.ndarray,
    kind: str,
    sigma_T: Optional[np.ndarray] = None,
    R_T: Optional[np.ndarray] = None,
) -> RatioLimitCovariance:
    """
    Delta-method limit covariance of the feasible ratios

    CorrelationRatio at t: rows c_(k,l) = (1/sqrt(R_kk R_ll)) [e_kl - R_kl/(2 R_kk) e_kk - R_kl/(2 R_ll) e_ll],
    covariance C Sigma_t C^T.
    RelativeCovolatility at t against T: A_t = diag(1/R_T), A_T = diag(R_t/R_T^2),
    covariance A_t S_t A_t - A_t S_t A_T - A_T S_t A_t + A_T S_T A_T, since the
    t- and T-integrals share the covariance of the shorter one.

    Args:
        sigma_t: vech x vech statistic covariance at t
        R_t: vech centering values at t
        kind: "CorrelationRatio" or "RelativeCovolatility"
        sigma_T: Statistic covariance at T (relative covolatility)
        R_T: Centering at T (relative covolatility)

    Raises:
        DegenerateR: for vanishing centering values
    """
    sigma_t = np.asarray(sigma_t, dtype=float)
    R_t = np.asarray(R_t, dtype=float)
    size = len(R_t)
    p = int((np.sqrt(8 * size + 1) - 1) / 2)
    pairs = [vech_chi_xi(i) for i in range(1, size + 1)]
    if sigma_t.shape != (size, size):
        raise DimensionMismatch(f"Statistic covariance must be {size}x{size}")

    if kind == "CorrelationRatio":
        diag = {k: R_t[pairs.index((k, k))] for k in range(1, p + 1)}
        if any(v <= 0.0 for v in diag.values()):
            raise DegenerateR(f"Diagonal centering values must be positive, got {diag}")
        C = np.zeros((size, size))
        for i, (k, l) in enumerate(pairs):
            if k == l:
                continue
            scale = 1.0 / np.sqrt(diag[k] * diag[l])
            rkl = R_t[i]
            C[i, i] += scale
            C[i, pairs.index((k, k))] += -0.5 * scale * rkl / diag[k]
            C[i, pairs.index((l, l))] += -0.5 * scale * rkl / diag[l]
        matrix = C @ sigma_t @ C.T
        formula = "C Sigma_t C^T; c = (1/sqrt(Rkk Rll))[1, -Rkl/(2Rkk), -Rkl/(2Rll)]"
    elif kind == "RelativeCovolatility":
        if sigma_T is None or R_T is None:
            raise DegenerateR("Relative covolatility needs the terminal covariance and centering")
        R_T = np.asarray(R_T, dtype=float)
        if np.any(R_T == 0.0):
            raise DegenerateR("Terminal centering values must be non-zero")
        A_t = np.diag(1.0 / R_T)
        A_T = np.diag(R_t / R_T ** 2)
        sigma_T = np.asarray(sigma_T, dtype=float)
        matrix = A_t @ sigma_t @ A_t - A_t @ sigma_t @ A_T - A_T @ sigma_t @ A_t + A_T @ sigma_T @ A_T
        formula = "A_t S_t A_t - A_t S_t A_T - A_T S_t A_t + A_T S_T A_T"
    else:
        raise ValueError(f"Unknown ratio kind '{kind}'")

    matrix = 0.5 * (matrix + matrix.T)
    provenance = [["stated" if i == j else "model-derived" for j in range(size)] for i in range(size)]
    return RatioLimitCovariance(kind, pairs, matrix, provenance, _formula_hash(formula))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_d_matrix(D: DMatrix, path: Union[str, Path]) -> Tuple[Path, Path]:
    """Write D as CSV (labelled by flat index) plus a JSON header next to it"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header_path = path.with_suffix(".json")
    labels = [str(z) for z in range(1, D.descriptor.flat_size + 1)]
    try:
        pd.DataFrame(D.values, index=labels, columns=labels).to_csv(path, float_format="%.17g")
        with open(header_path, "w") as f:
            json.dump(D.header(), f, indent=2, sort_keys=True)
        logger.info("Saved D matrix (%s) to %s", D.descriptor.scheme, path)
    except Exception as e:
        logger.error("Error saving D matrix: %s", e)
        raise
    return path, header_path


def load_d_matrix(path: Union[str, Path]) -> DMatrix:
    path = Path(path)
    with open(path.with_suffix(".json")) as f:
        header = json.load(f)
    values = pd.read_csv(path, index_col=0, float_precision="round_trip").to_numpy(dtype=float)
    return DMatrix(IndexMapDescriptor.from_dict(header["descriptor"]), values,
                   header.get("diagnostics", {}), header.get("regime", Regime.CASE_I.value))
