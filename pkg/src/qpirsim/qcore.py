"""Exact dense linear algebra for small labeled qudit registers.

States live on an ordered tensor product of registers (first register is the
slowest-varying index). Everything is stored as dense complex128 arrays and
validated on construction; all comparisons between states go through density
operators or fidelity so that global phases never matter. Entropies and
qubit counts are in bits (log base 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    ResourceGuardError,
    StateValidationError,
    ZeroMatrixError,
)

TOL = 1e-9
EIG_CLAMP = 1e-12
MAX_AMPLITUDES = 1 << 22


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise InvalidDimensionError(f"register dimensions must be >= 1, got {dims}")
    total = 1
    for d in dims:
        total *= d
    if total > MAX_AMPLITUDES:
        raise ResourceGuardError(
            f"total dimension {total} exceeds the 2^22 amplitude guard"
        )
    return dims


def _as_array(data, shape) -> np.ndarray:
    arr = np.array(data, dtype=np.complex128).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise StateValidationError("entries must be finite (no NaN/Inf)")
    arr.setflags(write=False)
    return arr


def total_dim(dims: Sequence[int]) -> int:
    return int(np.prod([1, *dims]))


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateVector:
    """Unit-norm pure state over a list of registers."""

    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        amps = _as_array(self.amps, total_dim(dims))
        nrm = float(np.linalg.norm(amps))
        if abs(nrm - 1.0) > TOL:
            raise StateValidationError(f"state norm {nrm} is not 1 within {TOL}")
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def density(self) -> "DensityOperator":
        return DensityOperator(self.dims, np.outer(self.amps, self.amps.conj()))

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "amps": [[float(a.real), float(a.imag)] for a in self.amps],
        }


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive-semidefinite operator."""

    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        n = total_dim(dims)
        mat = _as_array(self.matrix, (n, n))
        if np.max(np.abs(mat - mat.conj().T)) > TOL:
            raise StateValidationError("density operator is not Hermitian")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > TOL:
            raise StateValidationError(f"density operator trace {tr} is not 1")
        if float(np.min(np.linalg.eigvalsh(mat))) < -TOL:
            raise StateValidationError("density operator has a negative eigenvalue")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "matrix": [
                [[float(v.real), float(v.imag)] for v in row] for row in self.matrix
            ],
        }


@dataclass(frozen=True)
class UnitaryOperator:
    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        n = total_dim(dims)
        mat = _as_array(self.matrix, (n, n))
        if np.max(np.abs(mat.conj().T @ mat - np.eye(n))) > TOL:
            raise StateValidationError("matrix is not unitary within tolerance")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "UnitaryOperator":
        return UnitaryOperator(self.dims, self.matrix.conj().T)


@dataclass(frozen=True)
class ProjectiveMeasurement:
    """Complete set of orthogonal projectors with outcome labels."""

    dims: tuple[int, ...]
    projectors: tuple

    def __post_init__(self):
        dims = _check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        n = total_dim(dims)
        projs = []
        for label, mat in self.projectors:
            mat = _as_array(mat, (n, n))
            if np.max(np.abs(mat - mat.conj().T)) > TOL:
                raise StateValidationError(f"projector {label} is not Hermitian")
            if np.max(np.abs(mat @ mat - mat)) > TOL:
                raise StateValidationError(f"projector {label} is not idempotent")
            projs.append((label, mat))
        acc = np.zeros((n, n), dtype=np.complex128)
        for _, mat in projs:
            acc += mat
        if np.max(np.abs(acc - np.eye(n))) > TOL:
            raise StateValidationError("projectors do not sum to the identity")
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if np.max(np.abs(projs[i][1] @ projs[j][1])) > TOL:
                    raise StateValidationError("projectors are not pairwise orthogonal")
        object.__setattr__(self, "projectors", tuple(projs))


@dataclass(frozen=True)
class Channel:
    """CPTP map given by Kraus operators (may change dimension)."""

    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]
    kraus: tuple

    def __post_init__(self):
        ind = _check_dims(self.in_dims)
        outd = _check_dims(self.out_dims)
        object.__setattr__(self, "in_dims", ind)
        object.__setattr__(self, "out_dims", outd)
        n_in, n_out = total_dim(ind), total_dim(outd)
        ops = tuple(_as_array(k, (n_out, n_in)) for k in self.kraus)
        acc = np.zeros((n_in, n_in), dtype=np.complex128)
        for k in ops:
            acc += k.conj().T @ k
        if np.max(np.abs(acc - np.eye(n_in))) > TOL:
            raise StateValidationError("Kraus operators do not satisfy sum K'K = I")
        object.__setattr__(self, "kraus", ops)

    def apply(self, rho: DensityOperator) -> DensityOperator:
        if rho.dims != self.in_dims and rho.dim != total_dim(self.in_dims):
            raise DimensionMismatchError(
                f"channel input dims {self.in_dims} do not match state dims {rho.dims}"
            )
        out = np.zeros((total_dim(self.out_dims),) * 2, dtype=np.complex128)
        for k in self.kraus:
            out += k @ rho.matrix @ k.conj().T
        return DensityOperator(self.out_dims, out)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def basis_state(dims: Sequence[int], indices: Sequence[int]) -> StateVector:
    dims = _check_dims(dims)
    if len(indices) != len(dims):
        raise DimensionMismatchError("one basis index per register required")
    amps = np.zeros(total_dim(dims), dtype=np.complex128)
    flat = 0
    for d, i in zip(dims, indices):
        if not 0 <= i < d:
            raise InvalidDimensionError(f"basis index {i} out of range for dim {d}")
        flat = flat * d + i
    amps[flat] = 1.0
    return StateVector(dims, amps)


def uniform_state(d: int) -> StateVector:
    """|+_d> = (1/sqrt(d)) sum_j |j>."""
    d = _check_dims([d])[0]
    return StateVector((d,), np.full(d, 1.0 / math.sqrt(d), dtype=np.complex128))


def omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def pauli_x(d: int) -> UnitaryOperator:
    """Cyclic shift X_d |s> = |s+1 mod d>."""
    (d,) = _check_dims([d])
    mat = np.zeros((d, d), dtype=np.complex128)
    for s in range(d):
        mat[(s + 1) % d, s] = 1.0
    return UnitaryOperator((d,), mat)


def pauli_z(d: int) -> UnitaryOperator:
    """Phase Z_d |s> = omega^s |s> with omega = exp(2 pi i / d)."""
    (d,) = _check_dims([d])
    return UnitaryOperator((d,), np.diag(np.exp(2j * np.pi * np.arange(d) / d)))


def shift_unitary(d: int, e: int) -> UnitaryOperator:
    """X_d^e built exactly as a permutation (no float matrix powers)."""
    (d,) = _check_dims([d])
    mat = np.zeros((d, d), dtype=np.complex128)
    for s in range(d):
        mat[(s + e) % d, s] = 1.0
    return UnitaryOperator((d,), mat)


def phase_unitary(d: int, e: int) -> UnitaryOperator:
    """Z_d^e with exponents reduced mod d before exponentiation."""
    (d,) = _check_dims([d])
    return UnitaryOperator(
        (d,), np.diag(np.exp(2j * np.pi * ((np.arange(d) * e) % d) / d))
    )


def max_entangled(d: int) -> StateVector:
    """|I_d>> = (1/sqrt(d)) sum_s |s,s> on two d-dimensional registers."""
    (d,) = _check_dims([d])
    amps = np.zeros(d * d, dtype=np.complex128)
    amps[:: d + 1] = 1.0 / math.sqrt(d)
    return StateVector((d, d), amps)


def vectorize(m: np.ndarray) -> tuple[StateVector, float]:
    """|M>> for a d1 x d2 matrix: entries m_st / sqrt(d2), then renormalized.

    Returns the unit-norm state together with the pre-normalization norm
    ||M||_F / sqrt(d2) so callers can recover the original scale.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionMismatchError("vectorize expects a 2-D matrix")
    d1, d2 = m.shape
    _check_dims([d1, d2])
    raw = m.reshape(d1 * d2) / math.sqrt(d2)
    nrm = float(np.linalg.norm(raw))
    if nrm < 1e-300:
        raise ZeroMatrixError("cannot vectorize the zero matrix")
    return StateVector((d1, d2), raw / nrm), nrm


def computational_measurement(d: int) -> ProjectiveMeasurement:
    (d,) = _check_dims([d])
    projs = []
    for j in range(d):
        p = np.zeros((d, d), dtype=np.complex128)
        p[j, j] = 1.0
        projs.append((j, p))
    return ProjectiveMeasurement((d,), tuple(projs))


def bell_measurement(d: int) -> ProjectiveMeasurement:
    """Rank-1 projectors onto |X^a Z^b>> with outcomes (a, b) in [0:d-1]^2."""
    (d,) = _check_dims([d])
    x, z = pauli_x(d), pauli_z(d)
    projs = []
    zb = np.eye(d, dtype=np.complex128)
    for b in range(d):
        mat = zb
        for a in range(d):
            vec, _ = vectorize(mat)
            projs.append(((a, b), np.outer(vec.amps, vec.amps.conj())))
            mat = x.matrix @ mat
        zb = zb @ z.matrix
    return ProjectiveMeasurement((d, d), tuple(projs))


def dual_basis_state(d: int, j: int) -> StateVector:
    """|u_j> = (1/sqrt(d)) sum_k e^{2 pi i kj/d} |k>."""
    (d,) = _check_dims([d])
    if not 0 <= j < d:
        raise InvalidDimensionError(f"dual basis index {j} out of range for dim {d}")
    amps = np.exp(2j * np.pi * np.arange(d) * j / d) / math.sqrt(d)
    return StateVector((d,), amps)


def permutation_unitary(dims: Sequence[int], fn) -> UnitaryOperator:
    """Unitary permuting computational basis states.

    ``fn`` maps an index tuple (one entry per register) to a new index tuple;
    it must be a bijection on the product set.
    """
    dims = _check_dims(dims)
    n = total_dim(dims)
    mat = np.zeros((n, n), dtype=np.complex128)
    for src in np.ndindex(*dims):
        dst = tuple(fn(src))
        if len(dst) != len(dims) or any(not 0 <= v < d for v, d in zip(dst, dims)):
            raise DimensionMismatchError(f"permutation image {dst} out of range")
        mat[int(np.ravel_multi_index(dst, dims)), int(np.ravel_multi_index(src, dims))] = 1.0
    return UnitaryOperator(dims, mat)


# ---------------------------------------------------------------------------
# State plumbing
# ---------------------------------------------------------------------------


def tensor(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(a.dims + b.dims, np.kron(a.amps, b.amps))


def _apply_matrix(tensor_arr: np.ndarray, axes: Sequence[int], mat: np.ndarray) -> np.ndarray:
    """Apply ``mat`` to the given axes of a tensor (same output dims)."""
    n = tensor_arr.ndim
    axes = list(axes)
    rest = [a for a in range(n) if a not in axes]
    perm = axes + rest
    t = np.transpose(tensor_arr, perm)
    front = t.shape[: len(axes)]
    rest_shape = t.shape[len(axes):]
    t = t.reshape(int(np.prod(front, dtype=np.int64)) if front else 1, -1)
    out = (mat @ t).reshape(*front, *rest_shape)
    return np.transpose(out, np.argsort(perm))


def _resolve_targets(dims: tuple[int, ...], targets: Sequence[int], op_dims) -> list[int]:
    targets = list(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise DimensionMismatchError("duplicate target registers")
    if any(t < 0 or t >= len(dims) for t in targets):
        raise DimensionMismatchError(f"target indices {targets} out of range")
    if tuple(dims[t] for t in targets) != tuple(op_dims):
        raise DimensionMismatchError(
            f"operator dims {tuple(op_dims)} do not match targets "
            f"{tuple(dims[t] for t in targets)}"
        )
    return targets


def apply_unitary(state: StateVector, u: UnitaryOperator, targets: Sequence[int]) -> StateVector:
    """Apply ``u`` to ``targets`` (identity on all other registers)."""
    targets = _resolve_targets(state.dims, targets, u.dims)
    out = _apply_matrix(state.tensor_view(), targets, u.matrix)
    return StateVector(state.dims, out.reshape(-1))


def apply_controlled(
    state: StateVector, control: int, arms: dict
) -> StateVector:
    """Apply, for each computational value v of ``control``, the unitary arms[v].

    ``arms`` maps control values to ``(UnitaryOperator, target indices)``;
    values without an arm get the identity. Targets must not include the
    control register.
    """
    dims = state.dims
    if not 0 <= control < len(dims):
        raise DimensionMismatchError(f"control index {control} out of range")
    psi = np.moveaxis(state.tensor_view(), control, 0).copy()
    for val, (u, targets) in arms.items():
        if not 0 <= val < dims[control]:
            raise DimensionMismatchError(f"control value {val} out of range")
        targets = _resolve_targets(dims, targets, u.dims)
        if control in targets:
            raise DimensionMismatchError("control register cannot be a target")
        shifted = [t - 1 if t > control else t for t in targets]
        psi[val] = _apply_matrix(psi[val], shifted, u.matrix)
    out = np.moveaxis(psi, 0, control)
    return StateVector(dims, out.reshape(-1))


def measure(
    state: StateVector, meas: ProjectiveMeasurement, targets: Sequence[int]
) -> list[tuple[object, float, StateVector]]:
    """All measurement branches as (label, probability, renormalized state)."""
    targets = _resolve_targets(state.dims, targets, meas.dims)
    psi = state.tensor_view()
    branches = []
    for label, proj in meas.projectors:
        out = _apply_matrix(psi, targets, proj).reshape(-1)
        p = float(np.real(np.vdot(out, out)))
        if p < 1e-14:
            continue
        branches.append((label, p, StateVector(state.dims, out / math.sqrt(p))))
    return branches


def prepare_registers(
    state: StateVector, targets: Sequence[int], block: StateVector
) -> StateVector:
    """Replace target registers, which must be in |0...0> and unentangled, by ``block``."""
    targets = _resolve_targets(state.dims, targets, block.dims)
    n = len(state.dims)
    rest = [a for a in range(n) if a not in targets]
    perm = list(targets) + rest
    t = np.transpose(state.tensor_view(), perm).reshape(total_dim(block.dims), -1)
    leak = float(np.linalg.norm(t[1:]))
    if leak > TOL:
        raise StateValidationError(
            "prepare requires the target registers to hold |0...0> exactly"
        )
    out = np.outer(block.amps, t[0]).reshape(
        *block.dims, *[state.dims[a] for a in rest]
    )
    return StateVector(state.dims, np.transpose(out, np.argsort(perm)).reshape(-1))


def partial_trace_state(state: StateVector, keep: Sequence[int]) -> DensityOperator:
    """Reduced density operator of a pure state; ``keep`` order is honored."""
    keep = list(int(i) for i in keep)
    if not keep:
        return DensityOperator((1,), np.array([[1.0]]))
    if len(set(keep)) != len(keep) or any(i < 0 or i >= len(state.dims) for i in keep):
        raise DimensionMismatchError(f"bad kept registers {keep}")
    rest = [a for a in range(len(state.dims)) if a not in keep]
    t = np.transpose(state.tensor_view(), keep + rest)
    mat = t.reshape(int(np.prod([state.dims[i] for i in keep])), -1)
    return DensityOperator(tuple(state.dims[i] for i in keep), mat @ mat.conj().T)


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """Reduced density operator of a mixed state; ``keep`` order is honored."""
    keep = list(int(i) for i in keep)
    if not keep:
        return DensityOperator((1,), np.array([[1.0]]))
    n = len(rho.dims)
    if len(set(keep)) != len(keep) or any(i < 0 or i >= n for i in keep):
        raise DimensionMismatchError(f"bad kept registers {keep}")
    t = rho.matrix.reshape(rho.dims + rho.dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters) - len(keep):
        raise ResourceGuardError("too many registers for einsum-based partial trace")
    row = list(letters[:n])
    col = list(letters[:n])
    nxt = n
    for i in keep:
        col[i] = letters[nxt]
        nxt += 1
    sub = "".join(row) + "".join(col) + "->" + "".join(row[i] for i in keep) + "".join(
        col[i] for i in keep
    )
    kdims = tuple(rho.dims[i] for i in keep)
    mat = np.einsum(sub, t).reshape(total_dim(kdims), total_dim(kdims))
    return DensityOperator(kdims, mat)


def purify(rho: DensityOperator) -> StateVector:
    """Canonical purification with a reference register appended last."""
    vals, vecs = np.linalg.eigh(rho.matrix)
    vals = np.clip(vals, 0.0, None)
    d = rho.dim
    psi = (vecs * np.sqrt(vals)).reshape(d * d)
    psi = psi / np.linalg.norm(psi)
    return StateVector(rho.dims + (d,), psi)


def apply_channel(rho: DensityOperator, ch: Channel, targets: Sequence[int]) -> DensityOperator:
    """Apply a channel to a subset of registers of a density operator."""
    targets = _resolve_targets(rho.dims, targets, ch.in_dims)
    if len(ch.out_dims) != len(targets):
        raise DimensionMismatchError("channel must output one register per input register")
    n = len(rho.dims)
    rest = [a for a in range(n) if a not in targets]
    perm = list(targets) + rest
    t = np.transpose(rho.matrix.reshape(rho.dims + rho.dims), perm + [a + n for a in perm])
    din = total_dim(ch.in_dims)
    rest_dim = total_dim([rho.dims[a] for a in rest])
    t = t.reshape(din, rest_dim, din, rest_dim)
    dout = total_dim(ch.out_dims)
    out = np.zeros((dout, rest_dim, dout, rest_dim), dtype=np.complex128)
    for k in ch.kraus:
        tmp = np.einsum("ij,jakb->iakb", k, t)
        out += np.einsum("iakb,lk->ialb", tmp, k.conj())
    new_front = tuple(ch.out_dims)
    new_rest = tuple(rho.dims[a] for a in rest)
    out = out.reshape(new_front + new_rest + new_front + new_rest)
    m = len(new_front) + len(new_rest)
    inv = np.argsort(perm)  # output dims replace targets position-for-position
    out = np.transpose(out, list(inv) + [m + i for i in inv])
    final_dims = list(rho.dims)
    for pos, tgt in enumerate(targets):
        final_dims[tgt] = new_front[pos]
    nd = total_dim(final_dims)
    return DensityOperator(tuple(final_dims), out.reshape(nd, nd))


def identity_channel(dims: Sequence[int]) -> Channel:
    dims = _check_dims(dims)
    return Channel(dims, dims, (np.eye(total_dim(dims)),))


def depolarizing_channel(d: int) -> Channel:
    """Completely depolarizing channel rho -> I/d."""
    (d,) = _check_dims([d])
    ops = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=np.complex128)
            k[i, j] = 1.0 / math.sqrt(d)
            ops.append(k)
    return Channel((d,), (d,), tuple(ops))


# ---------------------------------------------------------------------------
# Metrics and entropies
# ---------------------------------------------------------------------------


def _as_density(x) -> DensityOperator:
    return x.density() if isinstance(x, StateVector) else x


def trace_distance(rho, sigma) -> float:
    """(1/2) ||rho - sigma||_1 for Hermitian operands of equal dimension."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    if rho.dim != sigma.dim:
        raise DimensionMismatchError("trace distance needs equal dimensions")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix))))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, the squared-overlap convention."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    if rho.dim != sigma.dim:
        raise DimensionMismatchError("fidelity needs equal dimensions")
    s = _psd_sqrt(rho.matrix)
    inner = s @ sigma.matrix @ s
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.sqrt(vals)) ** 2)


def von_neumann_entropy(rho: DensityOperator) -> float:
    """H(rho) = -Tr rho log2 rho in bits; eigenvalues below 1e-12 contribute 0."""
    if not isinstance(rho, DensityOperator):
        raise StateValidationError("entropy expects a DensityOperator")
    vals = np.linalg.eigvalsh(rho.matrix)
    vals = vals[vals > EIG_CLAMP]
    if vals.size == 0:
        return 0.0
    h = -float(np.sum(vals * np.log2(vals)))
    return max(h, 0.0)


def transmission_information(rho: DensityOperator, gamma: Channel) -> float:
    """I(rho, Gamma) = H(rho) + H(Gamma(rho)) - H((id (x) Gamma) |psi><psi|) in bits."""
    if total_dim(gamma.in_dims) != rho.dim:
        raise DimensionMismatchError("channel input does not match the state")
    psi = purify(rho)
    joint = apply_channel(psi.density(), gamma, list(range(len(rho.dims))))
    return (
        von_neumann_entropy(rho)
        + von_neumann_entropy(gamma.apply(rho))
        - von_neumann_entropy(joint)
    )


# ---------------------------------------------------------------------------
# Seeded randomness for tests and verification suites
# ---------------------------------------------------------------------------


def random_unitary(d: int, rng: np.random.Generator) -> UnitaryOperator:
    """Haar-distributed unitary via QR of a Ginibre matrix."""
    (d,) = _check_dims([d])
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return UnitaryOperator((d,), q)


def random_pure_state(dims: Sequence[int], rng: np.random.Generator) -> StateVector:
    dims = _check_dims(dims)
    n = total_dim(dims)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return StateVector(dims, v / np.linalg.norm(v))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    (d,) = _check_dims([d])
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    mat = g @ g.conj().T
    return DensityOperator((d,), mat / np.trace(mat))
