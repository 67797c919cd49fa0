"""Spin-1/2 operator algebra, system Hamiltonians, and ideal gate unitaries.

Conventions used throughout the package:

* The spin at list position k owns bit k of the computational-basis index,
  most-significant bit first.  Bit value 0 means spin-up (+1/2 eigenvalue
  of Iz).
* States are traceless deviation density matrices (high-temperature
  convention); their overall scale carries no meaning.
* Hamiltonians are stored in angular frequency (rad/s).  All user-facing
  frequencies and couplings are in Hz and are multiplied by 2*pi at
  construction time.
* Propagation uses U = exp(-i H dt) and rho -> U rho U^dag, so a rotation
  exp(-i theta Ix) maps Iz to Iz cos(theta) - Iy sin(theta).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

MAX_SPINS = 10

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
UNITARY_TOL = 1e-10

_PAULI_HALF = {
    "x": np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex),
    "y": np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex),
    "z": np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex),
}

_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


class SpinSystemError(ValueError):
    """Invalid spin-system description."""


class OperatorError(ValueError):
    """Matrix does not satisfy the invariants of its declared role."""


class ExpressionError(ValueError):
    """Malformed operator expression; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


@dataclass(frozen=True)
class Spin:
    """One spin-1/2 nucleus: RF channel assignment, rotating-frame offset,
    relative thermal polarization, and relaxation metadata."""

    name: str
    channel: str
    offset_hz: float
    weight: float = 1.0
    t1_s: float | None = None
    t2star_s: float | None = None


@dataclass(frozen=True)
class Coupling:
    a: str
    b: str
    j_hz: float


@dataclass(frozen=True)
class Channel:
    name: str
    max_rf_hz: float


@dataclass(frozen=True)
class SpinSystem:
    """A named collection of coupled spin-1/2 nuclei on RF channels.

    Spin order is significant: position k owns bit k of the basis index
    (most-significant first).
    """

    spins: tuple[Spin, ...]
    couplings: tuple[Coupling, ...] = ()
    channels: tuple[Channel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "channels", tuple(self.channels))
        names = [s.name for s in self.spins]
        if not names:
            raise SpinSystemError("system has no spins")
        if len(names) > MAX_SPINS:
            raise SpinSystemError(f"at most {MAX_SPINS} spins supported, got {len(names)}")
        if len(set(names)) != len(names):
            raise SpinSystemError(f"duplicate spin names in {names}")
        channel_names = [c.name for c in self.channels]
        if len(set(channel_names)) != len(channel_names):
            raise SpinSystemError(f"duplicate channel names in {channel_names}")
        for label in names + channel_names:
            if not _NAME_RE.match(label):
                raise SpinSystemError(f"name {label!r} must match [A-Za-z0-9_]+")
        for s in self.spins:
            if s.channel not in channel_names:
                raise SpinSystemError(f"spin {s.name} assigned to unknown channel {s.channel!r}")
            if not np.isfinite(s.offset_hz):
                raise SpinSystemError(f"spin {s.name}: offset must be finite")
            if not np.isfinite(s.weight):
                raise SpinSystemError(f"spin {s.name}: weight must be finite")
            for attr in ("t1_s", "t2star_s"):
                val = getattr(s, attr)
                if val is not None and not (np.isfinite(val) and val > 0):
                    raise SpinSystemError(f"spin {s.name}: {attr} must be positive, got {val}")
        for c in self.channels:
            if not (np.isfinite(c.max_rf_hz) and c.max_rf_hz > 0):
                raise SpinSystemError(f"channel {c.name}: max_rf_hz must be positive")
        seen_pairs = set()
        for c in self.couplings:
            if c.a not in names or c.b not in names:
                raise SpinSystemError(f"coupling ({c.a},{c.b}) references unknown spin")
            if c.a == c.b:
                raise SpinSystemError(f"coupling ({c.a},{c.b}) must join two distinct spins")
            if not np.isfinite(c.j_hz):
                raise SpinSystemError(f"coupling ({c.a},{c.b}): J must be finite")
            pair = frozenset((c.a, c.b))
            if pair in seen_pairs:
                raise SpinSystemError(f"coupling ({c.a},{c.b}) listed more than once")
            seen_pairs.add(pair)

    @property
    def n_spins(self) -> int:
        return len(self.spins)

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins

    def spin_index(self, name: str) -> int:
        for k, s in enumerate(self.spins):
            if s.name == name:
                return k
        raise SpinSystemError(f"unknown spin {name!r}")

    def spin(self, name: str) -> Spin:
        return self.spins[self.spin_index(name)]

    def channel(self, name: str) -> Channel:
        for c in self.channels:
            if c.name == name:
                return c
        raise SpinSystemError(f"unknown channel {name!r}")

    def channel_spins(self, name: str) -> tuple[Spin, ...]:
        self.channel(name)
        return tuple(s for s in self.spins if s.channel == name)

    def j_hz(self, a: str, b: str) -> float:
        """J coupling between two spins in Hz; symmetric, zero if unlisted."""
        self.spin_index(a)
        self.spin_index(b)
        if a == b:
            return 0.0
        for c in self.couplings:
            if {c.a, c.b} == {a, b}:
                return c.j_hz
        return 0.0


@dataclass(frozen=True)
class OperatorMatrix:
    """A dense operator on the full Hilbert space with a declared role.

    Roles and their construction-time invariants:
      state        Hermitian and traceless (deviation density matrix)
      hamiltonian  Hermitian
      propagator   unitary
      observable   none
    """

    entries: np.ndarray
    role: str = "observable"

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise OperatorError(f"operator must be square, got shape {m.shape}")
        n = m.shape[0]
        if n < 2 or (n & (n - 1)) != 0:
            raise OperatorError(f"dimension {n} is not a power of two")
        if not np.all(np.isfinite(m.view(float))):
            raise OperatorError("operator has non-finite entries")
        if self.role not in ("state", "hamiltonian", "propagator", "observable"):
            raise OperatorError(f"unknown role {self.role!r}")
        if self.role in ("state", "hamiltonian"):
            herm = np.max(np.abs(m - m.conj().T))
            if herm > HERMITIAN_TOL:
                raise OperatorError(f"role={self.role} requires Hermitian matrix "
                                    f"(max |M - M^dag| = {herm:.3e})")
        if self.role == "state":
            tr = abs(m.trace())
            if tr > TRACE_TOL:
                raise OperatorError(f"deviation state must be traceless (|trace| = {tr:.3e})")
        if self.role == "propagator":
            dev = np.max(np.abs(m.conj().T @ m - np.eye(n)))
            if dev > UNITARY_TOL:
                raise OperatorError(f"propagator must be unitary (max |U^dag U - I| = {dev:.3e})")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_spins(self) -> int:
        return int(self.entries.shape[0]).bit_length() - 1


def _embed(op2: np.ndarray, spin_index: int, n_spins: int) -> np.ndarray:
    """Kronecker-embed a single-spin operator at the given position."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n_spins):
        out = np.kron(out, op2 if k == spin_index else np.eye(2, dtype=complex))
    return out


def single_spin_operator(axis: str, spin_index: int, n_spins: int) -> OperatorMatrix:
    """Angular-momentum operator I{x|y|z} of one spin, embedded in the full space.

    The result is Hermitian, traceless, and squares to I/4.
    """
    if axis not in _PAULI_HALF:
        raise OperatorError(f"axis must be one of x, y, z, got {axis!r}")
    if n_spins <= 0 or n_spins > MAX_SPINS:
        raise OperatorError(f"n_spins must be in [1, {MAX_SPINS}], got {n_spins}")
    if not 0 <= spin_index < n_spins:
        raise OperatorError(f"spin_index {spin_index} out of range for {n_spins} spins")
    return OperatorMatrix(_embed(_PAULI_HALF[axis], spin_index, n_spins), role="observable")


_TOKEN_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_TOKEN_FACTOR = re.compile(r"I([xyz])\(([^)]*)\)")


def parse_operator_expression(text: str, system: SpinSystem) -> OperatorMatrix:
    """Parse a sum of scaled spin-operator products into a matrix.

    Grammar: sum of terms separated by + or -; each term is an optional
    signed decimal coefficient followed by '*'-separated factors of the
    form I{x|y|z}(spin-name).  Whitespace is ignored.  Repeating a spin
    within a term is allowed; factors multiply left to right.

    The result is Hermitian for real coefficients.  It is tagged as a
    deviation state when traceless, otherwise as an observable.
    """
    n = system.n_spins
    dim = system.dim
    total = np.zeros((dim, dim), dtype=complex)
    pos = 0
    length = len(text)

    def skip_ws(p: int) -> int:
        while p < length and text[p].isspace():
            p += 1
        return p

    pos = skip_ws(pos)
    if pos >= length:
        raise ExpressionError("empty expression", pos)

    first_term = True
    while pos < length:
        sign = 1.0
        pos = skip_ws(pos)
        if first_term:
            if text[pos] == "+" or text[pos] == "-":
                sign = -1.0 if text[pos] == "-" else 1.0
                pos += 1
        else:
            if text[pos] == "+":
                pos += 1
            elif text[pos] == "-":
                sign = -1.0
                pos += 1
            else:
                raise ExpressionError(f"expected '+' or '-', found {text[pos]!r}", pos)
        pos = skip_ws(pos)
        first_term = False

        # optional decimal coefficient (sign already consumed)
        coeff = sign
        m = _TOKEN_NUMBER.match(text, pos)
        if m:
            coeff *= float(m.group(0))
            pos = m.end()
            pos = skip_ws(pos)
            if pos < length and text[pos] == "*":
                pos += 1
                pos = skip_ws(pos)
            elif pos < length and text[pos] not in "+-":
                raise ExpressionError(f"expected '*' after coefficient, found {text[pos]!r}", pos)

        # one or more '*'-separated factors; matching is required at term
        # start and after every '*', so coefficient-only terms are rejected
        term = None
        while True:
            m = _TOKEN_FACTOR.match(text, pos)
            if not m:
                raise ExpressionError("expected factor of the form Ix(name)", pos)
            axis, name = m.group(1), m.group(2)
            try:
                k = system.spin_index(name)
            except SpinSystemError:
                raise ExpressionError(f"unknown spin {name!r}", m.start(2)) from None
            factor = _embed(_PAULI_HALF[axis], k, n)
            term = factor if term is None else term @ factor
            pos = m.end()
            pos = skip_ws(pos)
            if pos < length and text[pos] == "*":
                pos += 1
                pos = skip_ws(pos)
                continue
            break

        total += coeff * term
        pos = skip_ws(pos)

    # products of non-commuting factors on one spin (allowed by the grammar)
    # can break Hermiticity, so the deviation-state tag is conditional
    is_state = (abs(total.trace()) <= TRACE_TOL
                and np.max(np.abs(total - total.conj().T)) <= HERMITIAN_TOL)
    return OperatorMatrix(total, role="state" if is_state else "observable")


def build_drift_hamiltonian(system: SpinSystem) -> OperatorMatrix:
    """Weak-coupling drift Hamiltonian, diagonal in the computational basis.

    H0 = 2*pi * (sum_i nu_i Iz_i + sum_{i<j} J_ij Iz_i Iz_j), with nu and J
    in Hz and the result in rad/s.
    """
    n = system.n_spins
    iz = [np.real(np.diag(_embed(_PAULI_HALF["z"], k, n))) for k in range(n)]
    diag = np.zeros(system.dim)
    for k, s in enumerate(system.spins):
        diag += s.offset_hz * iz[k]
    for c in system.couplings:
        a = system.spin_index(c.a)
        b = system.spin_index(c.b)
        diag += c.j_hz * iz[a] * iz[b]
    return OperatorMatrix(np.diag(2.0 * np.pi * diag).astype(complex), role="hamiltonian")


def build_control_operators(system: SpinSystem) -> dict[str, tuple[OperatorMatrix, OperatorMatrix]]:
    """Per-channel x/y control Hamiltonians in rad/s per Hz of RF amplitude.

    A channel drives every spin assigned to it with the same field, so its
    operator is 2*pi times the sum of I{x,y} over those spins.
    """
    n = system.n_spins
    out = {}
    for ch in system.channels:
        members = [k for k, s in enumerate(system.spins) if s.channel == ch.name]
        if not members:
            raise SpinSystemError(f"channel {ch.name!r} has no spins assigned")
        hx = sum(_embed(_PAULI_HALF["x"], k, n) for k in members)
        hy = sum(_embed(_PAULI_HALF["y"], k, n) for k in members)
        out[ch.name] = (OperatorMatrix(2.0 * np.pi * hx, role="hamiltonian"),
                        OperatorMatrix(2.0 * np.pi * hy, role="hamiltonian"))
    return out


def thermal_deviation_state(system: SpinSystem) -> OperatorMatrix:
    """Thermal-equilibrium deviation state: sum of weight_i * Iz_i."""
    n = system.n_spins
    total = np.zeros((system.dim, system.dim), dtype=complex)
    for k, s in enumerate(system.spins):
        total += s.weight * _embed(_PAULI_HALF["z"], k, n)
    return OperatorMatrix(total, role="state")


def ideal_comp_unitary(n_spins: int = 3) -> OperatorMatrix:
    """Ideal 3-spin compression: permutation exchanging |011> and |100>."""
    if n_spins != 3:
        raise OperatorError(f"compression oracle is defined for 3 spins, got {n_spins}")
    u = np.eye(8, dtype=complex)
    u[3, 3] = u[4, 4] = 0.0
    u[3, 4] = u[4, 3] = 1.0
    return OperatorMatrix(u, role="propagator")


def ideal_pe_unitary(variant: str, pair: tuple[int, int], n_spins: int) -> OperatorMatrix:
    """Ideal polarization exchange on a spin pair, embedded in the full space.

    plain_swap is the textbook SWAP.  phase_variant maps |01> <-> |10> and
    |11> -> -|11>; both conjugate any diagonal state identically.
    """
    if variant not in ("plain_swap", "phase_variant"):
        raise OperatorError(f"variant must be plain_swap or phase_variant, got {variant!r}")
    i, j = pair
    if i == j:
        raise OperatorError("pair indices must be distinct")
    for k in (i, j):
        if not 0 <= k < n_spins:
            raise OperatorError(f"spin index {k} out of range for {n_spins} spins")
    dim = 2 ** n_spins
    u = np.zeros((dim, dim), dtype=complex)
    shift_i = n_spins - 1 - i
    shift_j = n_spins - 1 - j
    for b in range(dim):
        bi = (b >> shift_i) & 1
        bj = (b >> shift_j) & 1
        target = b & ~(1 << shift_i) & ~(1 << shift_j)
        target |= (bj << shift_i) | (bi << shift_j)
        amp = 1.0
        if variant == "phase_variant" and bi == 1 and bj == 1:
            amp = -1.0
        u[target, b] = amp
    return OperatorMatrix(u, role="propagator")


def conjugate_state(rho: OperatorMatrix, u: OperatorMatrix) -> OperatorMatrix:
    """Apply a unitary to a deviation state: rho -> U rho U^dag."""
    m = u.entries @ rho.entries @ u.entries.conj().T
    return OperatorMatrix(0.5 * (m + m.conj().T), role=rho.role)


def expectation(observable: OperatorMatrix, rho: OperatorMatrix) -> float:
    """Re Tr(O rho) for a Hermitian observable."""
    return float(np.real(np.einsum("ij,ji->", observable.entries, rho.entries)))
