"""Round-based protocol execution over owned registers.

A protocol is a declarative schedule: register declarations, per-round user
and server step lists with transfer lists, and a reconstruction step list.
Execution tracks every measurement branch exactly (no sampling unless asked),
snapshots the global ensemble after every transfer, and accounts upload and
download qubits as log2 of the moved dimensions.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import qcore
from .errors import (
    DimensionMismatchError,
    OwnershipError,
    ProtocolDefinitionError,
)
from .qcore import DensityOperator, ProjectiveMeasurement, StateVector, UnitaryOperator

PRUNE_BELOW = 1e-12


class Owner(enum.Enum):
    USER = "USER"
    SERVER = "SERVER"
    REFERENCE = "REFERENCE"


class InputSet(enum.Enum):
    CLASSICAL = "classical"          # basis states, the paper's calligraphic C
    SUPERPOSITION = "superposition"  # arbitrary pure states, calligraphic Q


class Direction(enum.Enum):
    SETUP = "SETUP"
    QUERY = "QUERY"
    ANSWER = "ANSWER"


@dataclass(frozen=True)
class Register:
    name: str
    dim: int
    owner: Owner


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[Register, ...]

    def __post_init__(self):
        names = [r.name for r in self.registers]
        if len(set(names)) != len(names):
            raise ProtocolDefinitionError(f"duplicate register names in {names}")
        if any(r.dim < 1 for r in self.registers):
            raise ProtocolDefinitionError("register dimensions must be >= 1")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    def index(self, name: str) -> int:
        for i, r in enumerate(self.registers):
            if r.name == name:
                return i
        raise ProtocolDefinitionError(f"unknown register {name!r}")

    def owner(self, name: str) -> Owner:
        return self.registers[self.index(name)].owner

    def owned_by(self, owner: Owner) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers if r.owner == owner)

    def move(self, names: Sequence[str], new_owner: Owner) -> "RegisterLayout":
        regs = list(self.registers)
        for name in names:
            i = self.index(name)
            if regs[i].owner == Owner.REFERENCE:
                raise OwnershipError(f"reference register {name!r} can never move")
            regs[i] = Register(name, regs[i].dim, new_owner)
        return RegisterLayout(tuple(regs))


@dataclass(frozen=True)
class Branch:
    prob: float
    state: StateVector
    record: dict


@dataclass(frozen=True)
class OutcomeEnsemble:
    branches: tuple[Branch, ...]

    def __post_init__(self):
        total = sum(b.prob for b in self.branches)
        if any(b.prob < 0 for b in self.branches):
            raise ProtocolDefinitionError("branch probabilities must be >= 0")
        if abs(total - 1.0) > 1e-9:
            raise ProtocolDefinitionError(f"branch probabilities sum to {total}, not 1")


# ---------------------------------------------------------------------------
# Protocol step vocabulary
# ---------------------------------------------------------------------------
#
# Register lists may be given as a tuple of names or a callable k -> names.
# Gates and prepared states may be constants or callables (k, record) -> value,
# which is how outcome-dependent corrections and private randomness enter.


@dataclass(frozen=True)
class Apply:
    regs: object
    gate: object


@dataclass(frozen=True)
class ApplyControlled:
    control: str
    arms: Mapping[int, tuple[UnitaryOperator, tuple[str, ...]]]


@dataclass(frozen=True)
class Measure:
    regs: object
    meas: ProjectiveMeasurement
    label: str


@dataclass(frozen=True)
class Prepare:
    regs: object
    state: object


Step = object  # union of the four step dataclasses above


@dataclass(frozen=True)
class RegisterDecl:
    """Ancilla declaration; init is a basis index, StateVector, or callable of k."""

    name: str
    dim: int
    owner: Owner
    init: object = 0


@dataclass(frozen=True)
class RoundSpec:
    user_steps: tuple = ()
    query: tuple[str, ...] = ()
    server_steps: tuple = ()
    answer: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProtocolSpec:
    """Declarative r-round one-server QPIR protocol."""

    name: str
    message_dims: tuple[int, ...]
    input_set: InputSet
    registers: tuple[RegisterDecl, ...] = ()
    prior_entanglement: tuple[tuple[int, str, str], ...] = ()
    setup_steps: tuple = ()  # (party, step) pairs run before round 1
    rounds: tuple[RoundSpec, ...] = ()
    reconstruct_steps: tuple = ()
    output_register: object = None  # name or callable k -> name
    unitary_type: bool = False

    @property
    def f(self) -> int:
        return len(self.message_dims)

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    def output_name(self, k: int) -> str:
        if callable(self.output_register):
            return self.output_register(k)
        return self.output_register


@dataclass(frozen=True)
class TranscriptEvent:
    round_index: int
    direction: Direction
    moved: tuple[str, ...]
    qubits: float
    ensemble: OutcomeEnsemble
    layout: RegisterLayout


@dataclass(frozen=True)
class Transcript:
    protocol: str
    f: int
    dims: tuple[int, ...]
    k: int
    events: tuple[TranscriptEvent, ...]
    uc: float
    dc: float
    pe_ebits: float

    @property
    def cc(self) -> float:
        return self.uc + self.dc

    @property
    def num_rounds(self) -> int:
        return max((e.round_index for e in self.events), default=0)

    def event(self, round_index: int, direction: Direction) -> TranscriptEvent:
        for e in self.events:
            if e.round_index == round_index and e.direction == direction:
                return e
        raise ProtocolDefinitionError(
            f"no transcript event for round {round_index} {direction.value}"
        )


@dataclass(frozen=True)
class RunOutcome:
    spec: ProtocolSpec
    k: int
    ensemble: OutcomeEnsemble
    layout: RegisterLayout
    output_register: str
    transcript: Transcript


def _resolve(value, k, record=None):
    if callable(value):
        return value(k) if record is None else value(k, record)
    return value


def _qubits(layout: RegisterLayout, names: Sequence[str]) -> float:
    return float(sum(math.log2(layout.registers[layout.index(n)].dim) for n in names))


# ---------------------------------------------------------------------------
# Execution engine
# ---------------------------------------------------------------------------


class _Executor:
    def __init__(self, spec, layout, branches, k, rng=None):
        self.spec = spec
        self.layout = layout
        self.branches = branches  # list[Branch]
        self.k = k
        self.rng = rng
        self.events = []
        self.uc = 0.0
        self.dc = 0.0

    def _indices(self, names):
        return [self.layout.index(n) for n in names]

    def _check_owned(self, names, party):
        for n in names:
            owner = self.layout.owner(n)
            if owner != party:
                raise OwnershipError(
                    f"{party.value} touched register {n!r} owned by {owner.value}"
                )

    def exec_steps(self, steps, party):
        for step in steps:
            if isinstance(step, Apply):
                self._do_apply(step, party)
            elif isinstance(step, ApplyControlled):
                self._do_controlled(step, party)
            elif isinstance(step, Measure):
                self._do_measure(step, party)
            elif isinstance(step, Prepare):
                self._do_prepare(step, party)
            else:
                raise ProtocolDefinitionError(f"unknown step {step!r}")

    def _do_apply(self, step, party):
        out = []
        for br in self.branches:
            regs = _resolve(step.regs, self.k) if callable(step.regs) else step.regs
            gate = step.gate
            if callable(gate):
                gate = gate(self.k, br.record)
            self._check_owned(regs, party)
            st = qcore.apply_unitary(br.state, gate, self._indices(regs))
            out.append(Branch(br.prob, st, br.record))
        self.branches = out

    def _do_controlled(self, step, party):
        self._check_owned([step.control], party)
        idx_arms = {}
        names = set()
        for val, (u, regs) in step.arms.items():
            self._check_owned(regs, party)
            idx_arms[val] = (u, self._indices(regs))
            names.update(regs)
        ctrl = self.layout.index(step.control)
        out = []
        for br in self.branches:
            st = qcore.apply_controlled(br.state, ctrl, idx_arms)
            out.append(Branch(br.prob, st, br.record))
        self.branches = out

    def _do_measure(self, step, party):
        regs = _resolve(step.regs, self.k) if callable(step.regs) else step.regs
        self._check_owned(regs, party)
        idxs = self._indices(regs)
        out = []
        for br in self.branches:
            results = qcore.measure(br.state, step.meas, idxs)
            if self.rng is not None:
                probs = np.array([p for _, p, _ in results])
                choice = self.rng.choice(len(results), p=probs / probs.sum())
                label, _, post = results[choice]
                rec = dict(br.record)
                rec[step.label] = label
                out.append(Branch(br.prob, post, rec))
                continue
            for label, p, post in results:
                w = br.prob * p
                if w < PRUNE_BELOW:
                    continue
                rec = dict(br.record)
                rec[step.label] = label
                out.append(Branch(w, post, rec))
        self.branches = out

    def _do_prepare(self, step, party):
        regs = _resolve(step.regs, self.k) if callable(step.regs) else step.regs
        self._check_owned(regs, party)
        idxs = self._indices(regs)
        out = []
        for br in self.branches:
            block = step.state
            if callable(block):
                block = block(self.k, br.record)
            st = qcore.prepare_registers(br.state, idxs, block)
            out.append(Branch(br.prob, st, br.record))
        self.branches = out

    def transfer(self, names, party_from, party_to, round_index, direction):
        self._check_owned(names, party_from)
        q = _qubits(self.layout, names)
        self.layout = self.layout.move(names, party_to)
        if direction == Direction.QUERY:
            self.uc += q
        else:
            self.dc += q
        self.snapshot(round_index, direction, tuple(names), q)

    def snapshot(self, round_index, direction, moved=(), qubits=0.0):
        self.events.append(
            TranscriptEvent(
                round_index,
                direction,
                tuple(moved),
                float(qubits),
                OutcomeEnsemble(tuple(self.branches)),
                self.layout,
            )
        )


def _initial_layout_and_state(spec: ProtocolSpec, messages, k: int, reference: bool):
    if len(messages) != spec.f:
        raise DimensionMismatchError(
            f"protocol has {spec.f} messages, got {len(messages)}"
        )
    if not 1 <= k <= spec.f:
        raise DimensionMismatchError(f"target index {k} out of range 1..{spec.f}")
    regs: list[Register] = []
    blocks: list[StateVector] = []
    for ell, (d, msg) in enumerate(zip(spec.message_dims, messages), start=1):
        if reference:
            if not isinstance(msg, StateVector) or len(msg.dims) != 2 or msg.dims[0] != d:
                raise DimensionMismatchError(
                    f"message {ell} must be a purification on (X{ell}, R{ell}) "
                    f"with system dim {d}"
                )
            regs.append(Register(f"X{ell}", d, Owner.SERVER))
            regs.append(Register(f"R{ell}", msg.dims[1], Owner.REFERENCE))
            blocks.append(msg)
        elif isinstance(msg, StateVector):
            if msg.dims != (d,):
                raise DimensionMismatchError(
                    f"message {ell} has dims {msg.dims}, expected ({d},)"
                )
            regs.append(Register(f"X{ell}", d, Owner.SERVER))
            blocks.append(msg)
        else:
            regs.append(Register(f"X{ell}", d, Owner.SERVER))
            blocks.append(qcore.basis_state((d,), (int(msg),)))
    for d, user_reg, server_reg in spec.prior_entanglement:
        regs.append(Register(user_reg, d, Owner.USER))
        regs.append(Register(server_reg, d, Owner.SERVER))
        blocks.append(qcore.max_entangled(d))
    for decl in spec.registers:
        init = _resolve(decl.init, k)
        if isinstance(init, StateVector):
            if init.dims != (decl.dim,):
                raise DimensionMismatchError(
                    f"init state for {decl.name} has dims {init.dims}"
                )
            blocks.append(init)
        else:
            blocks.append(qcore.basis_state((decl.dim,), (int(init),)))
        regs.append(Register(decl.name, decl.dim, decl.owner))
    layout = RegisterLayout(tuple(regs))
    state = blocks[0]
    for b in blocks[1:]:
        state = qcore.tensor(state, b)
    return layout, state


def _execute(spec, messages, k, reference, rng):
    layout, state = _initial_layout_and_state(spec, messages, k, reference)
    ex = _Executor(spec, layout, [Branch(1.0, state, {})], k, rng=rng)
    for party, step in spec.setup_steps:
        ex.exec_steps([step], party)
    ex.snapshot(0, Direction.SETUP)
    for i, rd in enumerate(spec.rounds, start=1):
        ex.exec_steps(rd.user_steps, Owner.USER)
        ex.transfer(rd.query, Owner.USER, Owner.SERVER, i, Direction.QUERY)
        ex.exec_steps(rd.server_steps, Owner.SERVER)
        ex.transfer(rd.answer, Owner.SERVER, Owner.USER, i, Direction.ANSWER)
    ex.exec_steps(spec.reconstruct_steps, Owner.USER)
    out_reg = spec.output_name(k)
    if ex.layout.owner(out_reg) != Owner.USER:
        raise OwnershipError(f"output register {out_reg!r} is not USER-owned")
    pe = float(sum(math.log2(d) for d, _, _ in spec.prior_entanglement))
    transcript = Transcript(
        protocol=spec.name,
        f=spec.f,
        dims=spec.message_dims,
        k=k,
        events=tuple(ex.events),
        uc=ex.uc,
        dc=ex.dc,
        pe_ebits=pe,
    )
    return RunOutcome(
        spec=spec,
        k=k,
        ensemble=OutcomeEnsemble(tuple(ex.branches)),
        layout=ex.layout,
        output_register=out_reg,
        transcript=transcript,
    )


def run(spec: ProtocolSpec, messages, k: int, *, reference: bool = False) -> RunOutcome:
    """Execute by exhaustive branch enumeration (exact ensemble)."""
    return _execute(spec, messages, k, reference, rng=None)


def run_sampled(spec: ProtocolSpec, messages, k: int, seed: int, *, reference: bool = False) -> RunOutcome:
    """Execute sampling one branch per measurement with a seeded generator."""
    return _execute(spec, messages, k, reference, rng=np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# Views and reports
# ---------------------------------------------------------------------------


def ensemble_density(
    ensemble: OutcomeEnsemble, layout: RegisterLayout, names: Sequence[str]
) -> DensityOperator:
    """Branch-averaged reduced density operator on the listed registers, in order."""
    idxs = [layout.index(n) for n in names]
    if not idxs:
        return DensityOperator((1,), np.array([[1.0]]))
    dims = tuple(layout.dims[i] for i in idxs)
    n = qcore.total_dim(dims)
    acc = np.zeros((n, n), dtype=np.complex128)
    for br in ensemble.branches:
        acc += br.prob * qcore.partial_trace_state(br.state, idxs).matrix
    acc /= float(np.real(np.trace(acc)))
    return DensityOperator(dims, acc)


def server_view(transcript: Transcript, round_index: int) -> DensityOperator:
    """Server's reduced state upon receiving the query of the given round."""
    ev = transcript.event(round_index, Direction.QUERY)
    return ensemble_density(ev.ensemble, ev.layout, ev.layout.owned_by(Owner.SERVER))


def final_server_and_reference_view(outcome: RunOutcome) -> DensityOperator:
    names = outcome.layout.owned_by(Owner.SERVER) + outcome.layout.owned_by(
        Owner.REFERENCE
    )
    return ensemble_density(outcome.ensemble, outcome.layout, names)


def output_density(outcome: RunOutcome) -> DensityOperator:
    return ensemble_density(outcome.ensemble, outcome.layout, (outcome.output_register,))


def structural_complexity(spec: ProtocolSpec) -> dict:
    """UC/DC/CC/PE from the declared schedule alone (no amplitudes)."""
    dims = {}
    for ell, d in enumerate(spec.message_dims, start=1):
        dims[f"X{ell}"] = d
    for d, u, s in spec.prior_entanglement:
        dims[u] = d
        dims[s] = d
    for decl in spec.registers:
        dims[decl.name] = decl.dim
    uc = dc = 0.0
    for rd in spec.rounds:
        uc += sum(math.log2(dims[n]) for n in rd.query)
        dc += sum(math.log2(dims[n]) for n in rd.answer)
    pe = float(sum(math.log2(d) for d, _, _ in spec.prior_entanglement))
    return {"UC": uc, "DC": dc, "CC": uc + dc, "PE_ebits": pe}


def validate_spec(spec: ProtocolSpec) -> None:
    """Structural ownership validation for every k, without amplitudes."""
    for k in range(1, spec.f + 1):
        owners = {}
        for ell in range(1, spec.f + 1):
            owners[f"X{ell}"] = Owner.SERVER
        for _, u, s in spec.prior_entanglement:
            owners[u] = Owner.USER
            owners[s] = Owner.SERVER
        for decl in spec.registers:
            owners[decl.name] = decl.owner

        def touched(step):
            if isinstance(step, (Apply, Measure, Prepare)):
                return tuple(_resolve(step.regs, k)) if callable(step.regs) else step.regs
            if isinstance(step, ApplyControlled):
                names = [step.control]
                for _, (_, regs) in step.arms.items():
                    names.extend(regs)
                return tuple(names)
            raise ProtocolDefinitionError(f"unknown step {step!r}")

        def check(names, party, where):
            for n in names:
                if n not in owners:
                    raise ProtocolDefinitionError(f"{where}: unknown register {n!r}")
                if owners[n] != party:
                    raise OwnershipError(
                        f"{where}: {party.value} does not own {n!r} (k={k})"
                    )

        for party, step in spec.setup_steps:
            if spec.unitary_type and isinstance(step, Measure):
                raise ProtocolDefinitionError(
                    "unitary-type spec measures before reconstruction"
                )
            check(touched(step), party, "setup")
        for i, rd in enumerate(spec.rounds, start=1):
            for step in rd.user_steps:
                if spec.unitary_type and isinstance(step, Measure):
                    raise ProtocolDefinitionError(
                        "unitary-type spec measures before reconstruction"
                    )
                check(touched(step), Owner.USER, f"round {i} user")
            check(rd.query, Owner.USER, f"round {i} query")
            for n in rd.query:
                owners[n] = Owner.SERVER
            for step in rd.server_steps:
                if spec.unitary_type and isinstance(step, Measure):
                    raise ProtocolDefinitionError(
                        "unitary-type spec measures before reconstruction"
                    )
                check(touched(step), Owner.SERVER, f"round {i} server")
            check(rd.answer, Owner.SERVER, f"round {i} answer")
            for n in rd.answer:
                owners[n] = Owner.USER
        for step in spec.reconstruct_steps:
            check(touched(step), Owner.USER, "reconstruction")
        out = spec.output_name(k)
        if owners.get(out) != Owner.USER:
            raise ProtocolDefinitionError(
                f"output register {out!r} not USER-owned at the end (k={k})"
            )


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def transcript_to_json(outcome: RunOutcome) -> dict:
    """Deterministically ordered transcript report."""
    tr = outcome.transcript
    rounds = []
    for ev in tr.events:
        if ev.direction == Direction.SETUP:
            continue
        sv = ensemble_density(ev.ensemble, ev.layout, ev.layout.owned_by(Owner.SERVER))
        eigs = sorted(
            (round(float(v), 12) for v in np.linalg.eigvalsh(sv.matrix)), reverse=True
        )
        rounds.append(
            {
                "j": ev.round_index,
                "direction": ev.direction.value,
                "moved": list(ev.moved),
                "qubits": ev.qubits,
                "server_view_eigenvalues": eigs,
            }
        )
    return {
        "protocol": tr.protocol,
        "f": tr.f,
        "dims": list(tr.dims),
        "k": tr.k,
        "rounds": rounds,
        "UC": tr.uc,
        "DC": tr.dc,
        "CC": tr.cc,
        "PE_ebits": tr.pe_ebits,
        "records": sorted(
            {
                json.dumps({key: _jsonable(v) for key, v in br.record.items()}, sort_keys=True)
                for br in outcome.ensemble.branches
            }
        ),
    }
