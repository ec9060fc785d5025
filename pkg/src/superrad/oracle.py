"""Brute-force Lindblad dynamics in the full 2^N product space.

Only usable for small N, this module is the reference every reduced solver
is checked against: it builds the spin operators explicitly, integrates the
three-channel master equation on a dense density matrix, constructs the
coupled (j, m, alpha) basis by adding one spin at a time, and measures the
alpha-averaged population transfer rates of each channel.

Product-state ordering: spin 1 is the most significant factor, and each
spin uses the ordering (up, down), so ``J_z = diag(1/2, -1/2)`` for N = 1.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .dicke import DickeIndex, HalfInt, RateSet, degeneracy_Dj, enumerate_dicke_space
from .timeseries import SolverError, TimeSeries

__all__ = [
    "OPERATOR_CAP",
    "BASIS_CAP",
    "ResourceLimitError",
    "ProductOperator",
    "SpinOperators",
    "DickeBasis",
    "ChannelRates",
    "build_operators",
    "lindblad_rhs",
    "liouvillian",
    "evolve",
    "build_dicke_basis",
    "dicke_mixture",
    "dicke_populations",
    "measure_channel_rates",
    "write_snapshot",
    "read_snapshot",
]

OPERATOR_CAP = 10
BASIS_CAP = 12


class ResourceLimitError(ValueError):
    """Requested system size exceeds the configured brute-force cap."""


@dataclass(frozen=True)
class ProductOperator:
    matrix: sp.csr_matrix
    label: str


_SZ = sp.csr_matrix(np.array([[0.5, 0.0], [0.0, -0.5]]))
_SM = sp.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
_SP = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def _local(op, n, N):
    left = sp.identity(2**n, format="csr")
    right = sp.identity(2 ** (N - n - 1), format="csr")
    return sp.kron(sp.kron(left, op), right, format="csr")


@dataclass
class SpinOperators:
    """Local and collective spin operators of N spins (sparse, real)."""

    N: int
    jz_local: list[ProductOperator]
    jm_local: list[ProductOperator]
    jp_local: list[ProductOperator]
    jz: ProductOperator
    jm: ProductOperator
    jp: ProductOperator
    j2: ProductOperator

    @property
    def dim(self) -> int:
        return 2**self.N

    @property
    def jx(self) -> sp.csr_matrix:
        return (self.jp.matrix + self.jm.matrix) / 2

    @property
    def jy(self) -> sp.csr_matrix:
        return (self.jp.matrix - self.jm.matrix) / 2j


def build_operators(N: int, cap: int = OPERATOR_CAP) -> SpinOperators:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N > cap:
        raise ResourceLimitError(f"N={N} exceeds the brute-force operator cap {cap}")
    jz_l = [ProductOperator(_local(_SZ, n, N), f"J_z,{n + 1}") for n in range(N)]
    jm_l = [ProductOperator(_local(_SM, n, N), f"J_-,{n + 1}") for n in range(N)]
    jp_l = [ProductOperator(_local(_SP, n, N), f"J_+,{n + 1}") for n in range(N)]
    jz = sum(o.matrix for o in jz_l).tocsr()
    jm = sum(o.matrix for o in jm_l).tocsr()
    jp = sum(o.matrix for o in jp_l).tocsr()
    # J^2 = Jz^2 - Jz + J+ J-
    j2 = (jz @ jz - jz + jp @ jm).tocsr()
    return SpinOperators(
        N,
        jz_l,
        jm_l,
        jp_l,
        ProductOperator(jz, "J_z"),
        ProductOperator(jm, "J_-"),
        ProductOperator(jp, "J_+"),
        ProductOperator(j2, "J^2"),
    )


def _dissipator(o: sp.csr_matrix, rho: np.ndarray) -> np.ndarray:
    # L_O[rho] = 2 O rho O^+ - O^+ O rho - rho O^+ O
    od = o.conj().T.tocsr()
    odo = (od @ o).tocsr()
    rho_od = (o @ rho.conj().T).conj().T
    return 2 * (o @ rho_od) - odo @ rho - (odo @ rho.conj().T).conj().T


def lindblad_rhs(rho: np.ndarray, rates: RateSet, ops: SpinOperators) -> np.ndarray:
    """Right-hand side of the master equation evaluated on a dense density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (ops.dim, ops.dim):
        raise ValueError(f"rho has shape {rho.shape}, operators act on dimension {ops.dim}")
    rho = rho.astype(complex)
    out = np.zeros_like(rho)
    if rates.omega_0:
        jz = ops.jz.matrix
        out += 1j * rates.omega_0 * (jz @ rho - (jz @ rho.conj().T).conj().T)
    if rates.gamma_S:
        out += rates.gamma_S / 2 * _dissipator(ops.jm.matrix, rho)
    if rates.gamma_L:
        for o in ops.jm_local:
            out += rates.gamma_L / 2 * _dissipator(o.matrix, rho)
    if rates.gamma_D:
        for o in ops.jz_local:
            out += rates.gamma_D / 2 * _dissipator(o.matrix, rho)
    return out


def _super_dissipator(o: sp.csr_matrix) -> sp.csr_matrix:
    # row-major vec: vec(A rho B) = kron(A, B^T) vec(rho)
    d = o.shape[0]
    eye = sp.identity(d, format="csr")
    od = o.conj().T.tocsr()
    odo = (od @ o).tocsr()
    return (2 * sp.kron(o, o.conj()) - sp.kron(odo, eye) - sp.kron(eye, odo.T)).tocsr()


def liouvillian(rates: RateSet, ops: SpinOperators) -> sp.csr_matrix:
    """Sparse superoperator acting on the row-major flattening of rho."""
    d = ops.dim
    eye = sp.identity(d, format="csr")
    L = sp.csr_matrix((d * d, d * d), dtype=complex)
    if rates.omega_0:
        jz = ops.jz.matrix
        L = L + 1j * rates.omega_0 * (sp.kron(jz, eye) - sp.kron(eye, jz.T))
    if rates.gamma_S:
        L = L + rates.gamma_S / 2 * _super_dissipator(ops.jm.matrix)
    if rates.gamma_L:
        L = L + rates.gamma_L / 2 * sum(_super_dissipator(o.matrix) for o in ops.jm_local)
    if rates.gamma_D:
        L = L + rates.gamma_D / 2 * sum(_super_dissipator(o.matrix) for o in ops.jz_local)
    return L.tocsr()


DRIFT_LIMIT = 1e-6


def evolve(
    rho0: np.ndarray,
    rates: RateSet,
    t_grid,
    ops: SpinOperators | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    method: str = "DOP853",
    snapshots: bool = False,
    basis: "DickeBasis | None" = None,
) -> TimeSeries:
    """Integrate the master equation from ``rho0`` and sample the collective moments.

    Emits ``Jz, J2, JpJm, Jz2``. If ``basis`` is given, the alpha-aggregated
    Dicke populations are stored in ``extras['populations']`` (one row per
    sample, columns in :func:`enumerate_dicke_space` order). Trace and
    Hermiticity drift are checked at every sample and abort the run above
    1e-6; the most negative eigenvalue is recorded, not corrected.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0:
        raise ValueError("t_grid must be a 1-d grid starting at 0")
    if t_grid.size > 1 and not np.all(np.diff(t_grid) > 0):
        raise ValueError("t_grid must be strictly increasing")
    N = int(round(math.log2(rho0.shape[0])))
    if ops is None:
        ops = build_operators(N)
    if rho0.shape != (ops.dim, ops.dim):
        raise ValueError("rho0 dimension does not match the operators")
    _check_density(rho0, tol=1e-10)

    d = ops.dim
    L = liouvillian(rates, ops)
    if t_grid.size > 1:
        sol = solve_ivp(
            lambda t, y: L @ y,
            (0.0, float(t_grid[-1])),
            rho0.reshape(-1),
            method=method,
            t_eval=t_grid,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise SolverError(f"oracle integration failed: {sol.message}")
        states = sol.y.T.reshape(-1, d, d)
        nfev = int(sol.nfev)
    else:
        states = rho0[None]
        nfev = 0

    obs_ops = {
        "Jz": ops.jz.matrix,
        "J2": ops.j2.matrix,
        "JpJm": (ops.jp.matrix @ ops.jm.matrix).tocsr(),
        "Jz2": (ops.jz.matrix @ ops.jz.matrix).tocsr(),
    }
    cols = {k: np.empty(t_grid.size) for k in obs_ops}
    trace_drift = herm_drift = 0.0
    min_eig = np.inf
    for i, rho in enumerate(states):
        trace_drift = max(trace_drift, abs(np.trace(rho) - 1))
        herm_drift = max(herm_drift, np.max(np.abs(rho - rho.conj().T)))
        if trace_drift > DRIFT_LIMIT or herm_drift > DRIFT_LIMIT:
            raise SolverError(
                f"invariant drift at t={t_grid[i]:.6g}: trace {trace_drift:.3g}, hermiticity {herm_drift:.3g}"
            )
        min_eig = min(min_eig, float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]))
        for k, op in obs_ops.items():
            # Tr(A rho) = sum_ij A_ij rho_ji
            cols[k][i] = float(np.real((op.multiply(rho.T)).sum()))

    meta = {
        "solver": "oracle",
        "N": N,
        "rates": rates.as_dict(),
        "rtol": rtol,
        "atol": atol,
        "method": method,
        "nfev": nfev,
        "max_trace_drift": float(trace_drift),
        "max_hermiticity_drift": float(herm_drift),
        "min_eigenvalue": float(min_eig),
        "normalization": "raw",
    }
    extras = {}
    if snapshots:
        extras["snapshots"] = states
    if basis is not None:
        extras["populations"] = np.array([dicke_populations(rho, basis) for rho in states])
        extras["states"] = basis.bins
    return TimeSeries(t_grid, cols, meta, extras)


def _check_density(rho: np.ndarray, tol: float) -> None:
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix must have unit trace")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("density matrix must be Hermitian")
    if np.linalg.eigvalsh(rho)[0] < -1e-9:
        raise ValueError("density matrix must be positive semidefinite")


@dataclass
class DickeBasis:
    """Orthonormal coupled basis of the 2^N space.

    ``vectors[:, k]`` is the state labelled ``labels[k] = (2j, 2m, alpha)``.
    Columns are grouped by (j, m) in :func:`enumerate_dicke_space` order and,
    within a group, by alpha. Alpha enumerates the coupling histories of a j
    ladder in lexicographic order of the successive intermediate 2j values.
    """

    N: int
    vectors: np.ndarray
    labels: list[tuple[int, int, int]]
    bins: list[DickeIndex] = field(default_factory=list)
    bin_of_column: np.ndarray = field(default=None)

    def columns_for(self, j, m) -> np.ndarray:
        tj, tm = HalfInt.of(j).doubled, HalfInt.of(m).doubled
        return np.array([k for k, (a, b, _) in enumerate(self.labels) if a == tj and b == tm], dtype=int)

    def projector(self, j, m) -> np.ndarray:
        v = self.vectors[:, self.columns_for(j, m)]
        return v @ v.T

    def indicator(self) -> sp.csr_matrix:
        """(number of (j,m) bins) x 2^N matrix summing columns into their bin."""
        n = len(self.labels)
        return sp.csr_matrix((np.ones(n), (self.bin_of_column, np.arange(n))), shape=(len(self.bins), n))


def _cg_half(jr2: int, J2: int, M2: int, s2: int) -> float:
    """<jr, M - s; 1/2, s | J, M> for J = jr +- 1/2, all arguments doubled."""
    denom = jr2 + 1  # 2 jr + 1
    if J2 == jr2 + 1:
        num = Fraction(jr2 + s2 * M2 + 1, 2)  # jr + 2 s M + 1/2
        return math.sqrt(num / denom) if num > 0 else 0.0
    num = Fraction(jr2 - s2 * M2 + 1, 2)
    val = math.sqrt(num / denom) if num > 0 else 0.0
    return -s2 * val


def build_dicke_basis(N: int, cap: int = BASIS_CAP) -> DickeBasis:
    """Couple spins one at a time into simultaneous eigenvectors of J^2 and J_z."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N > cap:
        raise ResourceLimitError(f"N={N} exceeds the Dicke basis cap {cap}")
    up = np.array([1.0, 0.0])
    down = np.array([0.0, 1.0])
    # ladder: (history, 2j) -> {2m: vector}
    ladders = {((1,), 1): {1: up, -1: down}}
    for _ in range(1, N):
        new = {}
        for (hist, jr2), vecs in ladders.items():
            for J2 in (jr2 + 1, jr2 - 1):
                if J2 < 0:
                    continue
                block = {}
                for M2 in range(J2, -J2 - 1, -2):
                    v = 0.0
                    for s2, e in ((1, up), (-1, down)):
                        mr2 = M2 - s2
                        if abs(mr2) > jr2:
                            continue
                        c = _cg_half(jr2, J2, M2, s2)
                        if c:
                            v = v + c * np.kron(vecs[mr2], e)
                    block[M2] = v
                new[(hist + (J2,), J2)] = block
        ladders = new

    by_j: dict[int, list] = {}
    for (hist, J2), block in sorted(ladders.items(), key=lambda kv: kv[0][0]):
        by_j.setdefault(J2, []).append(block)
    bins = enumerate_dicke_space(N)
    columns, labels, bin_of = [], [], []
    for b, idx in enumerate(bins):
        tj, tm = idx.doubled
        for alpha, block in enumerate(by_j[tj]):
            columns.append(block[tm])
            labels.append((tj, tm, alpha))
            bin_of.append(b)
    vectors = np.column_stack(columns)
    return DickeBasis(N, vectors, labels, bins, np.array(bin_of))


def dicke_mixture(basis: DickeBasis, j, m) -> np.ndarray:
    """Uniform mixture over alpha of the states |j, m, alpha>."""
    D = degeneracy_Dj(basis.N, j)
    return basis.projector(j, m).astype(complex) / D


def dicke_populations(rho: np.ndarray, basis: DickeBasis) -> np.ndarray:
    """p(j, m) = sum over alpha of <j m alpha| rho |j m alpha>, in bin order."""
    v = basis.vectors
    diag = np.real(np.einsum("ik,ij,jk->k", v, rho, v))
    return basis.indicator() @ diag


@dataclass
class ChannelRates:
    """Alpha-averaged transfer rates of one channel.

    ``transitions[src]`` lists ``(dest, rate)`` pairs, self-transitions of the
    dephasing channel included; ``outflow[src]`` is gamma times the alpha
    average of ``sum_k <O_k^+ O_k>``.
    """

    N: int
    channel: str
    gamma: float
    transitions: dict[DickeIndex, list[tuple[DickeIndex, float]]]
    outflow: dict[DickeIndex, float]

    def rate(self, src: DickeIndex, dest: DickeIndex) -> float:
        return dict(self.transitions.get(src, [])).get(dest, 0.0)


def _channel_ops(channel: str, ops: SpinOperators) -> list[sp.csr_matrix]:
    if channel == "S":
        return [ops.jm.matrix]
    if channel == "L":
        return [o.matrix for o in ops.jm_local]
    if channel == "D":
        return [o.matrix for o in ops.jz_local]
    raise ValueError(f"channel must be one of 'S', 'L', 'D', got {channel!r}")


def measure_channel_rates(
    N: int,
    channel: str,
    gamma: float = 1.0,
    basis: DickeBasis | None = None,
    threshold: float = 1e-13,
) -> ChannelRates:
    """Measure population transfer rates of a channel from explicit matrix elements.

    rate((j,m) -> (j',m')) = gamma / D_j * sum_{alpha, alpha', k} |<j' m' alpha'| O_k |j m alpha>|^2
    """
    if basis is None:
        basis = build_dicke_basis(N, cap=OPERATOR_CAP)
    if N > OPERATOR_CAP:
        raise ResourceLimitError(f"N={N} exceeds the brute-force operator cap {OPERATOR_CAP}")
    ops = build_operators(N)
    B = basis.vectors
    W = np.zeros((B.shape[1], B.shape[1]))
    out_diag = np.zeros(B.shape[1])
    for o in _channel_ops(channel, ops):
        OB = np.asarray(o @ B)
        W += (B.T @ OB) ** 2
        out_diag += np.sum(OB * OB, axis=0)
    P = basis.indicator()
    R = np.asarray((P @ sp.csr_matrix(W) @ P.T).todense())
    Ds = np.array([degeneracy_Dj(N, idx.j) for idx in basis.bins], dtype=float)
    R = gamma * R / Ds[None, :]
    outflow = gamma * (P @ out_diag) / Ds

    transitions = {}
    for c, src in enumerate(basis.bins):
        dests = [(basis.bins[r], float(R[r, c])) for r in np.nonzero(R[:, c] > threshold)[0]]
        transitions[src] = dests
    return ChannelRates(N, channel, gamma, transitions, {b: float(x) for b, x in zip(basis.bins, outflow)})


_SNAPSHOT_HEADER = "<Id"  # N: uint32, t: float64


def write_snapshot(path, rho: np.ndarray, t: float) -> Path:
    """Flat little-endian dump: header (uint32 N, float64 t), then row-major (re, im) float64 pairs."""
    rho = np.asarray(rho, dtype=complex)
    N = int(round(math.log2(rho.shape[0])))
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(struct.pack(_SNAPSHOT_HEADER, N, float(t)))
        fh.write(np.ascontiguousarray(rho).astype("<c16").tobytes())
    return path


def read_snapshot(path) -> tuple[np.ndarray, float]:
    raw = Path(path).read_bytes()
    size = struct.calcsize(_SNAPSHOT_HEADER)
    N, t = struct.unpack(_SNAPSHOT_HEADER, raw[:size])
    d = 2**N
    rho = np.frombuffer(raw[size:], dtype="<c16").reshape(d, d).copy()
    return rho, t
