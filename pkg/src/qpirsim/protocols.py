"""Concrete protocol builders, the bundled 2-server XOR scheme, and attacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import qcore
from .errors import DimensionMismatchError, ProtocolDefinitionError, ResourceGuardError
from .fabric import (
    Apply,
    ApplyControlled,
    InputSet,
    Measure,
    Owner,
    Prepare,
    ProtocolSpec,
    RegisterDecl,
    RoundSpec,
)
from .qcore import StateVector, UnitaryOperator


def _adder_unitary(d0: int, dl: int) -> UnitaryOperator:
    """|j', j> -> |j'+j mod d0, j> on a (d0, dl) register pair."""
    return qcore.permutation_unitary(
        (d0, dl), lambda idx: ((idx[0] + idx[1]) % d0, idx[1])
    )


def _swap_unitary(d: int) -> UnitaryOperator:
    return qcore.permutation_unitary((d, d), lambda idx: (idx[1], idx[0]))


def _prep_basis(d: int, value: int) -> UnitaryOperator:
    return qcore.shift_unitary(d, value)


def _prep_dual(d: int, j: int) -> UnitaryOperator:
    """|0> -> |u_j>: shift to |j> then Fourier."""
    fourier = np.array(
        [[np.exp(2j * np.pi * r * c / d) / math.sqrt(d) for c in range(d)] for r in range(d)]
    )
    return UnitaryOperator((d,), fourier @ qcore.shift_unitary(d, j).matrix)


# ---------------------------------------------------------------------------
# Protocol 1: one round, final-state secrecy under the honest-server model
# ---------------------------------------------------------------------------


def build_trivial(f: int, dims) -> ProtocolSpec:
    """Download-all protocol: the server ships every message register."""
    dims = tuple(int(d) for d in dims)
    if f < 1 or len(dims) != f:
        raise ProtocolDefinitionError("need one dimension per message")
    answer = tuple(f"X{ell}" for ell in range(1, f + 1))
    return ProtocolSpec(
        name="trivial",
        message_dims=dims,
        input_set=InputSet.SUPERPOSITION,
        rounds=(RoundSpec(query=(), answer=answer),),
        output_register=lambda k: f"X{k}",
        unitary_type=True,
    )


def build_pr2(f: int, dims, with_measurement: bool = True) -> ProtocolSpec:
    """Index-register protocol: query |K>, answer K plus an accumulator.

    The server measures the message registers in the computational basis
    before applying the controlled adder; ``with_measurement=False`` omits
    that measurement and is insecure against superposed message states.
    """
    dims = tuple(int(d) for d in dims)
    if f < 1 or len(dims) != f:
        raise ProtocolDefinitionError("need one dimension per message")
    d = max(dims)
    server_steps = []
    if with_measurement:
        for ell in range(1, f + 1):
            server_steps.append(
                Measure((f"X{ell}",), qcore.computational_measurement(dims[ell - 1]), f"sm{ell}")
            )
    arms = {
        ell - 1: (_adder_unitary(d, dims[ell - 1]), ("H0", f"X{ell}"))
        for ell in range(1, f + 1)
    }
    server_steps.append(ApplyControlled("K", arms))
    return ProtocolSpec(
        name="pr2" if with_measurement else "pr2-nomeas",
        message_dims=dims,
        input_set=InputSet.CLASSICAL,
        registers=(
            RegisterDecl("K", f, Owner.USER, init=lambda k: k - 1),
            RegisterDecl("H0", d, Owner.SERVER, init=0),
        ),
        rounds=(
            RoundSpec(query=("K",), server_steps=tuple(server_steps), answer=("K", "H0")),
        ),
        reconstruct_steps=(Measure(("H0",), qcore.computational_measurement(d), "y"),),
        output_register="H0",
        unitary_type=not with_measurement,
    )


def build_pr2b(f: int, dims, shared_answer_ancilla: bool = False) -> ProtocolSpec:
    """Decoy-query protocol: real index and a random dual-basis decoy.

    The user draws A in {0,1} and B in [f] (modeled as measuring uniform
    ancillas), puts |K> on one query register and the decoy state
    (1/sqrt f) sum_l Z_f^B |l> (= |u_B> up to a global phase) on the other.
    """
    dims = tuple(int(d) for d in dims)
    if f < 1 or len(dims) != f:
        raise ProtocolDefinitionError("need one dimension per message")
    d = max(dims)

    def prep_k0(k, record):
        if record["A"] == 0:
            return _prep_basis(f, k - 1)
        return _prep_dual(f, record["B"])

    def prep_k1(k, record):
        if record["A"] == 0:
            return _prep_dual(f, record["B"])
        return _prep_basis(f, k - 1)

    second_target = "Hp0" if shared_answer_ancilla else "Hp1"
    arms0 = {
        ell - 1: (_adder_unitary(d, dims[ell - 1]), ("Hp0", f"X{ell}"))
        for ell in range(1, f + 1)
    }
    arms1 = {
        ell - 1: (_adder_unitary(d, dims[ell - 1]), (second_target, f"X{ell}"))
        for ell in range(1, f + 1)
    }
    answer = ("K0", "Hp0", "K1") if shared_answer_ancilla else ("K0", "Hp0", "K1", "Hp1")
    registers = [
        RegisterDecl("Aanc", 2, Owner.USER, init=qcore.uniform_state(2)),
        RegisterDecl("Banc", f, Owner.USER, init=qcore.uniform_state(f)),
        RegisterDecl("K0", f, Owner.USER, init=0),
        RegisterDecl("K1", f, Owner.USER, init=0),
        RegisterDecl("Hp0", d, Owner.SERVER, init=0),
    ]
    recon = []
    if not shared_answer_ancilla:
        registers.append(RegisterDecl("Hp1", d, Owner.SERVER, init=0))

        def cond_swap_k(k, record):
            if record["A"] == 1:
                return _swap_unitary(f)
            return qcore.UnitaryOperator((f, f), np.eye(f * f))

        def cond_swap_h(k, record):
            if record["A"] == 1:
                return _swap_unitary(d)
            return qcore.UnitaryOperator((d, d), np.eye(d * d))

        recon = [
            Apply(("K0", "K1"), cond_swap_k),
            Apply(("Hp0", "Hp1"), cond_swap_h),
        ]
    recon.append(Measure(("Hp0",), qcore.computational_measurement(d), "y"))
    return ProtocolSpec(
        name="pr2b",
        message_dims=dims,
        input_set=InputSet.CLASSICAL,
        registers=tuple(registers),
        rounds=(
            RoundSpec(
                user_steps=(
                    Measure(("Aanc",), qcore.computational_measurement(2), "A"),
                    Measure(("Banc",), qcore.computational_measurement(f), "B"),
                    Apply(("K0",), prep_k0),
                    Apply(("K1",), prep_k1),
                ),
                query=("K0", "K1"),
                server_steps=(
                    ApplyControlled("K0", arms0),
                    ApplyControlled("K1", arms1),
                ),
                answer=answer,
            ),
        ),
        reconstruct_steps=tuple(recon),
        output_register="Hp0",
        unitary_type=False,
    )


# ---------------------------------------------------------------------------
# Classical multi-server PIR simulated by one quantum server
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalPIRScheme:
    """Generic s-server scheme (q_t, ans_t, reconstruct) with randomness G."""

    name: str
    servers: int
    num_messages: int
    message_size: int
    randomness_size: int
    query_sizes: tuple[int, ...]
    answer_sizes: tuple[int, ...]
    query: Callable[[int, int, int], int]  # (t, g, k) -> query value
    answer: Callable[[int, int, tuple], int]  # (t, q, database) -> answer value
    reconstruct: Callable[[tuple], int]

    def databases(self):
        return np.ndindex(*([self.message_size] * self.num_messages))

    def validate(self):
        """Exhaustive correctness and k-independent query marginals."""
        if self.num_messages > 6:
            raise ResourceGuardError("exhaustive scheme validation capped at n <= 6")
        for db in self.databases():
            for k in range(1, self.num_messages + 1):
                for g in range(self.randomness_size):
                    ans = tuple(
                        self.answer(t, self.query(t, g, k), db)
                        for t in range(1, self.servers + 1)
                    )
                    if self.reconstruct(ans) != db[k - 1]:
                        raise ProtocolDefinitionError(
                            f"scheme {self.name} wrong on db={db}, k={k}, g={g}"
                        )
        for t in range(1, self.servers + 1):
            base = sorted(self.query(t, g, 1) for g in range(self.randomness_size))
            for k in range(2, self.num_messages + 1):
                got = sorted(self.query(t, g, k) for g in range(self.randomness_size))
                if got != base:
                    raise ProtocolDefinitionError(
                        f"scheme {self.name}: query marginal of server {t} depends on k"
                    )


def xor_scheme(n: int) -> ClassicalPIRScheme:
    """2-server subset-XOR scheme over an n-bit database."""
    if n < 1:
        raise ProtocolDefinitionError("database must have at least one bit")
    size = 1 << n

    def query(t, g, k):
        return g if t == 1 else g ^ (1 << (k - 1))

    def answer(t, q, db):
        acc = 0
        for i in range(n):
            if q >> i & 1:
                acc ^= db[i]
        return acc

    return ClassicalPIRScheme(
        name=f"xor[{n}]",
        servers=2,
        num_messages=n,
        message_size=2,
        randomness_size=size,
        query_sizes=(size, size),
        answer_sizes=(2, 2),
        query=query,
        answer=answer,
        reconstruct=lambda ans: ans[0] ^ ans[1],
    )


def build_kllgr5(scheme: ClassicalPIRScheme, n: int | None = None) -> ProtocolSpec:
    """One-server simulation of a classical s-server scheme, one round per server.

    The user prepares a superposition over the scheme randomness holding all
    queries, ships (query, blank answer) register pairs one server at a time,
    and the server accumulates its answer coherently off the message registers.
    """
    if n is not None and n != scheme.num_messages:
        raise DimensionMismatchError("n does not match the scheme's database size")
    n = scheme.num_messages
    s = scheme.servers
    d = scheme.message_size
    q_total = int(np.prod(scheme.query_sizes))
    dims = (d,) * n
    total = q_total * int(np.prod(scheme.query_sizes)) * int(
        np.prod(scheme.answer_sizes)
    ) * d ** (n + 1)
    if total > qcore.MAX_AMPLITUDES:
        raise ResourceGuardError(
            f"kllgr5 global dimension {total} exceeds the amplitude guard"
        )

    def phi1(k: int) -> StateVector:
        shape = (q_total, *scheme.query_sizes, *scheme.answer_sizes, d)
        amps = np.zeros(shape, dtype=np.complex128)
        for g in range(scheme.randomness_size):
            qs = tuple(scheme.query(t, g, k) for t in range(1, s + 1))
            enc = 0
            for qv, qsz in zip(qs, scheme.query_sizes):
                enc = enc * qsz + qv
            amps[(enc, *qs, *([0] * s), 0)] += 1.0
        amps = amps.reshape(-1)
        return StateVector(shape, amps / np.linalg.norm(amps))

    registers = [RegisterDecl("Q", q_total, Owner.USER, init=0)]
    for t in range(1, s + 1):
        registers.append(RegisterDecl(f"Q{t}", scheme.query_sizes[t - 1], Owner.USER, init=0))
    for t in range(1, s + 1):
        registers.append(RegisterDecl(f"Ans{t}", scheme.answer_sizes[t - 1], Owner.USER, init=0))
    registers.append(RegisterDecl("Out", d, Owner.USER, init=0))
    prep_names = ("Q",) + tuple(f"Q{t}" for t in range(1, s + 1)) + tuple(
        f"Ans{t}" for t in range(1, s + 1)
    ) + ("Out",)

    def phi1_with_out(k, record):
        return qcore.tensor(phi1(k), qcore.basis_state((d,), (0,)))

    rounds = []
    msg_regs = tuple(f"X{ell}" for ell in range(1, n + 1))
    for t in range(1, s + 1):
        qsz = scheme.query_sizes[t - 1]
        asz = scheme.answer_sizes[t - 1]

        def fn(idx, _t=t, _asz=asz):
            q, a = idx[0], idx[1]
            return (q, (a + scheme.answer(_t, q, idx[2:])) % _asz) + idx[2:]

        u = qcore.permutation_unitary((qsz, asz) + dims, fn)
        rounds.append(
            RoundSpec(
                query=(f"Q{t}", f"Ans{t}"),
                server_steps=(Apply((f"Q{t}", f"Ans{t}") + msg_regs, u),),
                answer=(f"Q{t}", f"Ans{t}"),
            )
        )

    def collect(idx):
        *ans, out = idx
        return (*ans, (out + scheme.reconstruct(tuple(ans))) % d)

    collect_u = qcore.permutation_unitary(tuple(scheme.answer_sizes) + (d,), collect)
    return ProtocolSpec(
        name="kllgr5",
        message_dims=dims,
        input_set=InputSet.CLASSICAL,
        registers=tuple(registers),
        setup_steps=((Owner.USER, Prepare(prep_names, phi1_with_out)),),
        rounds=tuple(rounds),
        reconstruct_steps=(
            Apply(tuple(f"Ans{t}" for t in range(1, s + 1)) + ("Out",), collect_u),
            Measure(("Out",), qcore.computational_measurement(d), "y"),
        ),
        output_register="Out",
        unitary_type=True,
    )


# ---------------------------------------------------------------------------
# Teleportation wrapper: quantum messages over any classical-message protocol
# ---------------------------------------------------------------------------


def _rename_regs(names, mapping):
    if callable(names):
        return lambda k: tuple(mapping.get(n, n) for n in names(k))
    return tuple(mapping.get(n, n) for n in names)


def _rename_step(step, mapping):
    if isinstance(step, Apply):
        return Apply(_rename_regs(step.regs, mapping), step.gate)
    if isinstance(step, ApplyControlled):
        return ApplyControlled(
            mapping.get(step.control, step.control),
            {
                v: (u, tuple(mapping.get(n, n) for n in regs))
                for v, (u, regs) in step.arms.items()
            },
        )
    if isinstance(step, Measure):
        return Measure(_rename_regs(step.regs, mapping), step.meas, step.label)
    if isinstance(step, Prepare):
        return Prepare(_rename_regs(step.regs, mapping), step.state)
    raise ProtocolDefinitionError(f"unknown step {step!r}")


def build_teleport_wrapper(inner: ProtocolSpec, dims) -> ProtocolSpec:
    """Teleport quantum messages into classical Bell outcomes, retrieve with ``inner``.

    The server Bell-measures each message against its half of a shared
    maximally entangled pair, the inner classical-message protocol retrieves
    the target outcome, and the user undoes the teleportation shift on its
    entanglement half.
    """
    dims = tuple(int(d) for d in dims)
    f = len(dims)
    if inner.input_set != InputSet.CLASSICAL:
        raise ProtocolDefinitionError("wrapper needs a classical-message inner protocol")
    if inner.message_dims != tuple(d * d for d in dims):
        raise DimensionMismatchError(
            f"inner alphabet {inner.message_dims} is not dims squared "
            f"{tuple(d * d for d in dims)}"
        )
    mapping = {f"X{ell}": f"M{ell}" for ell in range(1, f + 1)}
    taken = {f"Y{ell}" for ell in range(1, f + 1)}
    taken |= {f"Yp{ell}" for ell in range(1, f + 1)}
    taken |= set(mapping.values())
    for decl in inner.registers:
        if decl.name in taken or decl.name in mapping:
            raise ProtocolDefinitionError(
                f"inner register name {decl.name!r} collides with wrapper registers"
            )

    registers = []
    setup = []
    pe = []
    for ell in range(1, f + 1):
        d = dims[ell - 1]
        pe.append((d, f"Y{ell}", f"Yp{ell}"))
        registers.append(RegisterDecl(f"M{ell}", d * d, Owner.SERVER, init=0))
        setup.append(
            (Owner.SERVER, Measure((f"Yp{ell}", f"X{ell}"), qcore.bell_measurement(d), f"bell{ell}"))
        )

        def prep_m(k, record, _ell=ell, _d=d):
            a, b = record[f"bell{_ell}"]
            return qcore.shift_unitary(_d * _d, a * _d + b)

        setup.append((Owner.SERVER, Apply((f"M{ell}",), prep_m)))
    registers.extend(inner.registers)
    setup.extend((party, _rename_step(step, mapping)) for party, step in inner.setup_steps)

    rounds = tuple(
        RoundSpec(
            user_steps=tuple(_rename_step(s, mapping) for s in rd.user_steps),
            query=tuple(mapping.get(n, n) for n in rd.query),
            server_steps=tuple(_rename_step(s, mapping) for s in rd.server_steps),
            answer=tuple(mapping.get(n, n) for n in rd.answer),
        )
        for rd in inner.rounds
    )

    def inner_out(k):
        return mapping.get(inner.output_name(k), inner.output_name(k))

    def correction(k, record):
        d = dims[k - 1]
        a, b = divmod(record["mk"], d)
        # inverse of the X^a Z^-b teleport shift, i.e. Z^b X^-a
        return UnitaryOperator(
            (d,), qcore.phase_unitary(d, b).matrix @ qcore.shift_unitary(d, -a).matrix
        )

    recon = tuple(_rename_step(s, mapping) for s in inner.reconstruct_steps) + (
        Measure(
            lambda k: (inner_out(k),),
            qcore.computational_measurement(inner.message_dims[0]),
            "mk",
        ),
        Apply(lambda k: (f"Y{k}",), correction),
    )
    return ProtocolSpec(
        name=f"qwrap:{inner.name}",
        message_dims=dims,
        input_set=InputSet.SUPERPOSITION,
        registers=tuple(registers),
        prior_entanglement=tuple(pe) + inner.prior_entanglement,
        setup_steps=tuple(setup),
        rounds=rounds,
        reconstruct_steps=recon,
        output_register=lambda k: f"Y{k}",
        unitary_type=False,
    )


# ---------------------------------------------------------------------------
# Attacks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackSpec:
    """A server deviation plus its declared recovery maps and extraction."""

    name: str
    transform: Callable[[ProtocolSpec], ProtocolSpec]
    recovery: tuple  # one Channel or None (identity) per round
    extract: Callable[[dict], object]

    def apply(self, spec: ProtocolSpec) -> ProtocolSpec:
        attacked = self.transform(spec)
        if attacked.num_rounds != spec.num_rounds:
            raise ProtocolDefinitionError("attack changed the answer schedule")
        return attacked


def attack_basis_measurement() -> AttackSpec:
    """Measure incoming queries (and the held messages) in the computational basis."""

    def transform(spec: ProtocolSpec) -> ProtocolSpec:
        dims = {}
        for ell, d in enumerate(spec.message_dims, start=1):
            dims[f"X{ell}"] = d
        for d, u, s_ in spec.prior_entanglement:
            dims[u] = d
            dims[s_] = d
        for decl in spec.registers:
            dims[decl.name] = decl.dim
        rd = spec.rounds[0]
        pre = [
            Measure((n,), qcore.computational_measurement(dims[n]), f"atk_{n}")
            for n in rd.query
        ]
        pre += [
            Measure((f"X{ell}",), qcore.computational_measurement(d), f"atk_X{ell}")
            for ell, d in enumerate(spec.message_dims, start=1)
        ]
        rounds = (replace(rd, server_steps=tuple(pre) + rd.server_steps),) + spec.rounds[1:]
        return replace(
            spec, name=f"{spec.name}+basis-measure", rounds=rounds, unitary_type=False
        )

    def extract(record: dict):
        for key in sorted(record):
            if key.startswith("atk_") and not key.startswith("atk_X"):
                return int(record[key]) + 1
        return 0

    return AttackSpec(
        name="basis-measure", transform=transform, recovery=(), extract=extract
    )


def attack_null() -> AttackSpec:
    """Honest behavior declared as an attack; the undetectability baseline."""
    return AttackSpec(
        name="null",
        transform=lambda spec: spec,
        recovery=(),
        extract=lambda record: 0,
    )


def superposition_attack_inputs(dims) -> tuple[StateVector, ...]:
    """The all-|+_d> message tuple that breaks the measurement-free variant."""
    return tuple(qcore.uniform_state(int(d)) for d in dims)


ATTACKS = {
    "basis-measure": attack_basis_measurement,
    "null": attack_null,
}


def build_protocol(name: str, f: int = 2, d=2, n: int = 3) -> ProtocolSpec:
    """Registry lookup: trivial | pr2 | pr2-nomeas | pr2b | qwrap:<inner> | kllgr5."""
    dims = tuple(d) if isinstance(d, (tuple, list)) else (int(d),) * f
    if name.startswith("qwrap:"):
        inner_name = name.split(":", 1)[1]
        inner = build_protocol(inner_name, f=f, d=tuple(x * x for x in dims), n=n)
        return build_teleport_wrapper(inner, dims)
    if name == "trivial":
        return build_trivial(f, dims)
    if name == "pr2":
        return build_pr2(f, dims, with_measurement=True)
    if name == "pr2-nomeas":
        return build_pr2(f, dims, with_measurement=False)
    if name == "pr2b":
        return build_pr2b(f, dims)
    if name == "kllgr5":
        return build_kllgr5(xor_scheme(n))
    raise KeyError(name)


PROTOCOL_NAMES = ("trivial", "pr2", "pr2-nomeas", "pr2b", "qwrap:pr2", "kllgr5")
