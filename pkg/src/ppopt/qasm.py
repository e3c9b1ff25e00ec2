"""Circuit type plus a reader/writer for a small OpenQASM 2.0 subset."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .angles import Angle

PHASE_GATES = frozenset({"cx", "rz", "x", "swap"})

# name -> multiple of pi, for the named diagonal gates
_NAMED_PHASES = {
    "t": Fraction(1, 4),
    "tdg": Fraction(-1, 4),
    "s": Fraction(1, 2),
    "sdg": Fraction(-1, 2),
    "z": Fraction(1),
}


class QasmError(Exception):
    """Base class for errors raised while reading OpenQASM."""


class QasmSyntaxError(QasmError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnsupportedGate(QasmError):
    def __init__(self, name: str, line: int):
        super().__init__(f"line {line}: unsupported gate '{name}'")
        self.name = name
        self.line = line


class MultipleRegisters(QasmError):
    def __init__(self, line: int):
        super().__init__(f"line {line}: only one quantum register is supported")
        self.line = line


@dataclass(frozen=True)
class Gate:
    """A gate on integer qubit indices.

    ``name`` is one of ``cx``, ``rz``, ``h``, ``x``, ``swap`` or the name of
    some other single-qubit gate, which the optimizer treats as opaque.
    """

    name: str
    qubits: tuple[int, ...]
    angle: Angle | None = None

    def __post_init__(self):
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.name}: repeated qubit in {self.qubits}")
        arity = 2 if self.name in ("cx", "swap") else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.name} expects {arity} qubit(s), got {self.qubits}")
        if (self.name == "rz") != (self.angle is not None):
            raise ValueError("only rz carries an angle")

    @property
    def is_phase(self) -> bool:
        """True for gates that stay inside a phase-polynomial block."""
        return self.name in PHASE_GATES

    def on(self, *qubits: int) -> Gate:
        return Gate(self.name, tuple(qubits), self.angle)

    def __str__(self) -> str:
        args = ",".join(f"q[{q}]" for q in self.qubits)
        if self.angle is not None:
            return f"{self.name}({self.angle.to_qasm()}) {args};"
        return f"{self.name} {args};"


def cx(control: int, target: int) -> Gate:
    return Gate("cx", (control, target))


def rz(qubit: int, angle: Angle) -> Gate:
    return Gate("rz", (qubit,), angle)


def h(qubit: int) -> Gate:
    return Gate("h", (qubit,))


def x(qubit: int) -> Gate:
    return Gate("x", (qubit,))


def swap(a: int, b: int) -> Gate:
    return Gate("swap", (a, b))


@dataclass
class Circuit:
    qubit_count: int
    gates: list[Gate] = field(default_factory=list)
    name: str = field(default="circuit", compare=False)

    def __post_init__(self):
        for g in self.gates:
            if max(g.qubits) >= self.qubit_count:
                raise ValueError(f"{g} exceeds {self.qubit_count} qubits")

    def __len__(self) -> int:
        return len(self.gates)

    def count(self, name: str) -> int:
        return sum(1 for g in self.gates if g.name == name)

    @property
    def cnot_count(self) -> int:
        return self.count("cx")

    def inverse(self) -> Circuit:
        inv = []
        for g in reversed(self.gates):
            if g.name == "rz":
                inv.append(rz(g.qubits[0], -g.angle))
            elif g.name in ("cx", "x", "h", "swap"):
                inv.append(g)
            else:
                raise ValueError(f"cannot invert opaque gate {g.name}")
        return Circuit(self.qubit_count, inv, self.name)


def toffoli(a: int, b: int, c: int) -> list[Gate]:
    """Clifford+T Toffoli: 6 CNOT, 7 T/T-dagger, 2 H."""
    t, tdg = Angle.exact(1, 4), Angle.exact(-1, 4)
    return [
        h(c), cx(b, c), rz(c, tdg), cx(a, c), rz(c, t), cx(b, c), rz(c, tdg),
        cx(a, c), rz(b, t), rz(c, t), h(c), cx(a, b), rz(a, t), rz(b, tdg), cx(a, b),
    ]


# -- parsing -----------------------------------------------------------------

_ANGLE_RE = re.compile(
    r"^(?P<neg>-)?\s*(?:"
    r"(?:(?P<num>\d+)\s*\*\s*)?pi(?:\s*/\s*(?P<den>\d+))?"
    r"|(?P<float>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r")$"
)
_QARG_RE = re.compile(r"^(\w+)\s*\[\s*(\d+)\s*\]$")
_STMT_RE = re.compile(r"^([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*(.*)$", re.S)


def parse_angle(text: str, line: int = 0) -> Angle:
    m = _ANGLE_RE.match(text.strip())
    if not m:
        raise QasmSyntaxError(line, f"cannot parse angle '{text}'")
    sign = -1 if m["neg"] else 1
    if m["float"] is not None:
        return Angle.from_float(sign * float(m["float"]))
    num = int(m["num"]) if m["num"] else 1
    den = int(m["den"]) if m["den"] else 1
    if den == 0:
        raise QasmSyntaxError(line, "zero denominator")
    return Angle.exact(sign * num, den)


def _statements(text: str):
    """Yield (line_number, statement) pairs with comments removed."""
    buf, start = [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("//", 1)[0]
        while body:
            head, sep, body = body.partition(";")
            if head.strip() and start is None:
                start = lineno
            buf.append(head)
            if sep:
                stmt = " ".join(buf).strip()
                if stmt:
                    yield start, stmt
                buf, start = [], None
            else:
                break
    if "".join(buf).strip():
        raise QasmSyntaxError(start, "missing ';'")


def parse_qasm(text: str, name: str = "circuit") -> Circuit:
    """Read OpenQASM 2.0 restricted to one ``qreg`` and the gates
    cx, rz, h, x, t, tdg, s, sdg, z, swap, ccx.

    Named phase gates become ``rz``; ``ccx`` is expanded with :func:`toffoli`.
    Barriers and comments are dropped.
    """
    reg_name, size = None, None
    gates: list[Gate] = []

    for line, stmt in _statements(text):
        if stmt.startswith("OPENQASM") or stmt.startswith("include"):
            continue
        m = _STMT_RE.match(stmt)
        if not m:
            raise QasmSyntaxError(line, f"cannot parse '{stmt}'")
        op, params, rest = m[1], m[2], m[3].strip()

        if op == "qreg":
            if reg_name is not None:
                raise MultipleRegisters(line)
            qm = _QARG_RE.match(rest)
            if not qm:
                raise QasmSyntaxError(line, f"bad register declaration '{stmt}'")
            reg_name, size = qm[1], int(qm[2])
            continue
        if op == "barrier":
            continue
        if op == "creg":
            raise UnsupportedGate("creg", line)

        op = op.lower() if op == "CX" else op
        if reg_name is None:
            raise QasmSyntaxError(line, "gate before qreg declaration")

        qubits = []
        for arg in filter(None, (a.strip() for a in rest.split(","))):
            qm = _QARG_RE.match(arg)
            if not qm:
                raise QasmSyntaxError(line, f"bad qubit argument '{arg}'")
            if qm[1] != reg_name:
                raise MultipleRegisters(line)
            idx = int(qm[2])
            if idx >= size:
                raise QasmSyntaxError(line, f"qubit index {idx} out of range")
            qubits.append(idx)

        expected = {"cx": 2, "swap": 2, "ccx": 3}.get(op, 1)
        if op not in ("cx", "swap", "ccx", "rz", "h", "x") and op not in _NAMED_PHASES:
            raise UnsupportedGate(op, line)
        if len(qubits) != expected or len(set(qubits)) != len(qubits):
            raise QasmSyntaxError(line, f"'{op}' needs {expected} distinct qubits")
        if (op == "rz") != (params is not None):
            raise QasmSyntaxError(line, f"bad parameter list for '{op}'")

        if op == "rz":
            gates.append(rz(qubits[0], parse_angle(params, line)))
        elif op in _NAMED_PHASES:
            gates.append(rz(qubits[0], Angle.exact(_NAMED_PHASES[op])))
        elif op == "ccx":
            gates.extend(toffoli(*qubits))
        else:
            gates.append(Gate(op, tuple(qubits)))

    if reg_name is None:
        raise QasmSyntaxError(1, "no qreg declaration")
    return Circuit(size, gates, name)


def emit_qasm(c: Circuit, decompose_swap: bool = False) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.qubit_count}];"]
    for g in c.gates:
        if g.name == "swap" and decompose_swap:
            a, b = g.qubits
            lines += [str(cx(a, b)), str(cx(b, a)), str(cx(a, b))]
        else:
            lines.append(str(g))
    return "\n".join(lines) + "\n"


def read_qasm(path) -> Circuit:
    from pathlib import Path

    p = Path(path)
    return parse_qasm(p.read_text(encoding="utf-8"), name=p.stem)
