"""Domain types and mean-field equations of motion.

Five matter fields are tracked: atoms A and B, the two intermediate dimers
(A2 from the homonuclear channel, AB from the heteronuclear channel) and the
final trimer A2B.  Amplitudes are dimensionless (populations N_i = |psi_i|^2,
normalised so the stoichiometric atomic mixture has N_a + N_b = 1).  Time is
measured in units of the inverse Feshbach coupling; all rates and collision
strengths are expressed in the same unit with the atomic density absorbed
(n = 1 in code units).
"""
from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, InvalidStateError

# Density in code units; collision phase rates carry an explicit 2*n factor.
DENSITY = 1.0


class Species(enum.IntEnum):
    """Field index of each tracked species."""

    ATOM_A = 0
    ATOM_B = 1
    DIMER_AA = 2
    DIMER_AB = 3
    TRIMER = 4


#: Number of A atoms bound in one particle of each species.
A_ATOM_CONTENT = (1, 0, 2, 1, 2)
#: Number of B atoms bound in one particle of each species.
B_ATOM_CONTENT = (0, 1, 0, 1, 1)
#: Total atoms bound per particle (weights of the conserved total).
ATOM_CONTENT = tuple(a + b for a, b in zip(A_ATOM_CONTENT, B_ATOM_CONTENT))


class Channel(enum.Enum):
    """Which dimer channel(s) participate in the conversion."""

    AA_ONLY = "AA"
    AB_ONLY = "AB"
    DUAL = "dual"

    @property
    def uses_channel1(self) -> bool:
        return self is not Channel.AB_ONLY

    @property
    def uses_channel2(self) -> bool:
        return self is not Channel.AA_ONLY

    @property
    def active_fields(self) -> tuple[int, ...]:
        if self is Channel.AA_ONLY:
            return (0, 1, 2, 4)
        if self is Channel.AB_ONLY:
            return (0, 1, 3, 4)
        return (0, 1, 2, 3, 4)


def sech(x: float) -> float:
    """Overflow-safe sech; underflows to zero for large |x|."""
    ax = abs(x)
    e = math.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


@dataclass(frozen=True)
class SechPulse:
    """Rabi pulse Omega(t) = amplitude * sech(t / width)."""

    amplitude: float
    width: float

    def __post_init__(self):
        if not (self.amplitude >= 0.0 and math.isfinite(self.amplitude)):
            raise ConfigurationError("sech pulse amplitude must be finite and >= 0")
        if not (self.width > 0.0 and math.isfinite(self.width)):
            raise ConfigurationError("sech pulse width must be finite and > 0")

    def __call__(self, t: float) -> float:
        return self.amplitude * sech(t / self.width)


@dataclass(frozen=True)
class ConstantPulse:
    """Time-independent Rabi frequency."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise ConfigurationError("constant pulse value must be finite and >= 0")

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class TabulatedPulse:
    """Piecewise-linear pulse through (time, value) pairs.

    Evaluation outside the tabulated range is a configuration error: the
    schedule must cover the full simulation window.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) < 2 or len(times) != len(values):
            raise ConfigurationError("tabulated pulse needs matching times/values with >= 2 points")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("tabulated pulse times must be strictly increasing")
        if any(not (v >= 0.0 and math.isfinite(v)) for v in values):
            raise ConfigurationError("tabulated pulse values must be finite and >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t: float) -> float:
        ts, vs = self.times, self.values
        if t < ts[0] or t > ts[-1]:
            raise ConfigurationError(f"pulse schedule not defined at t={t!r}")
        i = bisect_right(ts, t)
        if i >= len(ts):
            return vs[-1]
        if i == 0:
            return vs[0]
        w = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
        return vs[i - 1] * (1.0 - w) + vs[i] * w


@dataclass(frozen=True)
class RatioScaledPulse:
    """Sech profile divided by a piecewise-linear, positive ratio r(t).

    Omega(t) = scale * base_amplitude * sech(t / base_width) / r(t), with r
    held constant beyond its end knots.  Used to slave the second photo-
    association pulse to the first through a coupling-ratio schedule.
    """

    base_amplitude: float
    base_width: float
    ratio_times: tuple[float, ...]
    ratio_values: tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self):
        if not (self.base_amplitude >= 0.0 and math.isfinite(self.base_amplitude)):
            raise ConfigurationError("base amplitude must be finite and >= 0")
        if not (self.base_width > 0.0 and math.isfinite(self.base_width)):
            raise ConfigurationError("base width must be finite and > 0")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ConfigurationError("scale must be finite and > 0")
        times = tuple(float(t) for t in self.ratio_times)
        values = tuple(float(v) for v in self.ratio_values)
        if not times or len(times) != len(values):
            raise ConfigurationError("ratio schedule needs matching, non-empty times/values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("ratio knot times must be strictly increasing")
        if any(not (v > 0.0 and math.isfinite(v)) for v in values):
            raise ConfigurationError("ratio values must be finite and > 0")
        object.__setattr__(self, "ratio_times", times)
        object.__setattr__(self, "ratio_values", values)

    def ratio(self, t: float) -> float:
        ts, vs = self.ratio_times, self.ratio_values
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        i = bisect_right(ts, t)
        w = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
        return vs[i - 1] * (1.0 - w) + vs[i] * w

    def __call__(self, t: float) -> float:
        return self.scale * self.base_amplitude * sech(t / self.base_width) / self.ratio(t)


PulseSchedule = SechPulse | ConstantPulse | TabulatedPulse | RatioScaledPulse


@dataclass(frozen=True)
class FixedDetuning:
    """Hold the photoassociation detuning at a constant value."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ConfigurationError("fixed detuning must be finite")


@dataclass(frozen=True)
class CptTracking:
    """Re-solve the two-photon resonance condition at every evaluation time."""


DeltaMode = FixedDetuning | CptTracking


@dataclass(frozen=True, eq=False)
class CollisionMatrix:
    """Symmetric 5x5 matrix of s-wave collision strengths chi_ij."""

    chi: np.ndarray

    def __post_init__(self):
        arr = np.array(self.chi, dtype=float)
        if arr.shape != (5, 5):
            raise ConfigurationError("collision matrix must be 5x5")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("collision matrix entries must be finite")
        if not np.allclose(arr, arr.T, rtol=0.0, atol=0.0):
            raise ConfigurationError("collision matrix must be symmetric")
        arr.flags.writeable = False
        object.__setattr__(self, "chi", arr)

    def __eq__(self, other) -> bool:
        return isinstance(other, CollisionMatrix) and np.array_equal(self.chi, other.chi)

    def __hash__(self):
        return hash(self.chi.tobytes())

    def value(self, i: Species | int, j: Species | int) -> float:
        return float(self.chi[int(i), int(j)])

    @classmethod
    def zeros(cls) -> "CollisionMatrix":
        return cls(np.zeros((5, 5)))

    @classmethod
    def uniform(cls, value: float) -> "CollisionMatrix":
        return cls(np.full((5, 5), float(value)))

    @classmethod
    def sodium_rubidium(cls, dimer_cross: float = 0.0938) -> "CollisionMatrix":
        """Na-Rb parameter set: chi_aa=0.3125, chi_bb=0.5303, chi_ab=0.4214,
        every other pair 0.0938 except the tunable dimer-dimer cross term."""
        chi = np.full((5, 5), 0.0938)
        chi[0, 0] = 0.3125
        chi[1, 1] = 0.5303
        chi[0, 1] = chi[1, 0] = 0.4214
        chi[2, 3] = chi[3, 2] = float(dimer_cross)
        return cls(chi)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes of the five matter fields, in Species order."""

    psi: np.ndarray

    def __post_init__(self):
        arr = np.array(self.psi, dtype=complex)
        if arr.shape != (5,):
            raise InvalidStateError("state vector must hold exactly five complex amplitudes")
        if not np.all(np.isfinite(arr.view(float))):
            raise InvalidStateError("state amplitudes must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "psi", arr)

    def __eq__(self, other) -> bool:
        return isinstance(other, StateVector) and np.array_equal(self.psi, other.psi)

    def __hash__(self):
        return hash(self.psi.tobytes())

    @classmethod
    def from_amplitudes(cls, psi_a=0j, psi_b=0j, psi_d1=0j, psi_d2=0j, psi_g=0j) -> "StateVector":
        return cls(np.array([psi_a, psi_b, psi_d1, psi_d2, psi_g], dtype=complex))

    @classmethod
    def stoichiometric_mix(cls) -> "StateVector":
        """All-atomic initial condition with the 2:1 A:B mixture that feeds
        complete conversion into A2B trimers."""
        return cls.from_amplitudes(psi_a=math.sqrt(2.0 / 3.0), psi_b=math.sqrt(1.0 / 3.0))

    @classmethod
    def zero(cls) -> "StateVector":
        return cls(np.zeros(5, dtype=complex))

    @property
    def psi_a(self) -> complex:
        return complex(self.psi[0])

    @property
    def psi_b(self) -> complex:
        return complex(self.psi[1])

    @property
    def psi_d1(self) -> complex:
        return complex(self.psi[2])

    @property
    def psi_d2(self) -> complex:
        return complex(self.psi[3])

    @property
    def psi_g(self) -> complex:
        return complex(self.psi[4])

    def populations(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def population(self, species: Species | int) -> float:
        return float(abs(self.psi[int(species)]) ** 2)


@dataclass(frozen=True)
class ModelParams:
    """Couplings, pulse schedules, detunings, loss and collisions for a run."""

    channel: Channel
    omega1: PulseSchedule | None
    omega2: PulseSchedule | None
    delta: float
    delta_mode: DeltaMode = CptTracking()
    gamma: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    chi: CollisionMatrix = CollisionMatrix.sodium_rubidium()

    def __post_init__(self):
        if not isinstance(self.channel, Channel):
            raise ConfigurationError("channel must be a Channel value")
        if not (math.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ConfigurationError("gamma must be finite and >= 0")
        if not math.isfinite(self.delta):
            raise ConfigurationError("delta must be finite")
        if not isinstance(self.delta_mode, (FixedDetuning, CptTracking)):
            raise ConfigurationError("delta_mode must be FixedDetuning or CptTracking")
        if self.channel.uses_channel1:
            if self.omega1 is None:
                raise ConfigurationError("omega1 schedule required for the A2 channel")
            if not (math.isfinite(self.lambda1) and self.lambda1 > 0.0):
                raise ConfigurationError("lambda1 must be finite and > 0 for the A2 channel")
        if self.channel.uses_channel2:
            if self.omega2 is None:
                raise ConfigurationError("omega2 schedule required for the AB channel")
            if not (math.isfinite(self.lambda2) and self.lambda2 > 0.0):
                raise ConfigurationError("lambda2 must be finite and > 0 for the AB channel")

    @cached_property
    def chi_rows(self) -> tuple[tuple[float, ...], ...]:
        return tuple(tuple(float(v) for v in row) for row in self.chi.chi)

    def effective_couplings(self) -> tuple[float, float]:
        """(lambda1, lambda2) with inactive channels zeroed."""
        lam1 = self.lambda1 if self.channel.uses_channel1 else 0.0
        lam2 = self.lambda2 if self.channel.uses_channel2 else 0.0
        return lam1, lam2


def resolve_controls(params: ModelParams, t: float) -> tuple[float, float, float]:
    """Evaluate (Omega1, Omega2, Delta) at time t.

    Inactive-channel pulses evaluate to zero; under CPT tracking the
    detuning is re-solved from the instantaneous dark state.
    """
    om1 = params.omega1(t) if params.channel.uses_channel1 else 0.0
    om2 = params.omega2(t) if params.channel.uses_channel2 else 0.0
    if isinstance(params.delta_mode, FixedDetuning):
        big_delta = params.delta_mode.value
    else:
        from .cpt import tracking_detuning

        big_delta = tracking_detuning(params, t)
    return om1, om2, big_delta


def eom_terms(psi, chi_rows, lam1, om1, lam2, om2, delta, delta_total, gamma,
              density=DENSITY):
    """Time derivatives of the five field amplitudes.

    Works on any complex scalar type exposing .real/.imag/.conjugate()
    (python complex, mpmath.mpc), which lets the same expressions serve the
    fast integrator cross-checks and the high-precision stability path.
    delta_total is the trimer phase rate Delta + delta.
    """
    pa, pb, pd1, pd2, pg = psi
    na = pa.real * pa.real + pa.imag * pa.imag
    nb = pb.real * pb.real + pb.imag * pb.imag
    nd1 = pd1.real * pd1.real + pd1.imag * pd1.imag
    nd2 = pd2.real * pd2.real + pd2.imag * pd2.imag
    ng = pg.real * pg.real + pg.imag * pg.imag
    two_n = 2.0 * density
    ca = two_n * (chi_rows[0][0] * na + chi_rows[0][1] * nb + chi_rows[0][2] * nd1
                  + chi_rows[0][3] * nd2 + chi_rows[0][4] * ng)
    cb = two_n * (chi_rows[1][0] * na + chi_rows[1][1] * nb + chi_rows[1][2] * nd1
                  + chi_rows[1][3] * nd2 + chi_rows[1][4] * ng)
    cd1 = two_n * (chi_rows[2][0] * na + chi_rows[2][1] * nb + chi_rows[2][2] * nd1
                   + chi_rows[2][3] * nd2 + chi_rows[2][4] * ng)
    cd2 = two_n * (chi_rows[3][0] * na + chi_rows[3][1] * nb + chi_rows[3][2] * nd1
                   + chi_rows[3][3] * nd2 + chi_rows[3][4] * ng)
    cg = two_n * (chi_rows[4][0] * na + chi_rows[4][1] * nb + chi_rows[4][2] * nd1
                  + chi_rows[4][3] * nd2 + chi_rows[4][4] * ng)
    ca_ = pa.conjugate()
    cb_ = pb.conjugate()
    da = (1j * (ca * pa) + 2j * lam1 * (pd1 * ca_) + 1j * lam2 * (pd2 * cb_)
          - 1j * om2 * (pd2.conjugate() * pg))
    db = 1j * (cb * pb) + 1j * lam2 * (pd2 * ca_) - 1j * om1 * (pd1.conjugate() * pg)
    dd1 = (-(gamma - 1j * delta) * pd1 + 1j * (cd1 * pd1) + 1j * lam1 * (pa * pa)
           - 1j * om1 * (cb_ * pg))
    dd2 = (-(gamma - 1j * delta) * pd2 + 1j * (cd2 * pd2) + 1j * lam2 * (pa * pb)
           - 1j * om2 * (ca_ * pg))
    dg = (1j * (cg * pg) + 1j * delta_total * pg - 1j * om1 * (pd1 * pb)
          - 1j * om2 * (pd2 * pa))
    return da, db, dd1, dd2, dg


def _check_inactive_zero(state: StateVector, params: ModelParams) -> None:
    if not params.channel.uses_channel2 and state.psi[Species.DIMER_AB] != 0:
        raise InvalidStateError("AB-dimer amplitude must be zero in an A2-only run")
    if not params.channel.uses_channel1 and state.psi[Species.DIMER_AA] != 0:
        raise InvalidStateError("A2-dimer amplitude must be zero in an AB-only run")


def _rhs(state: StateVector, t: float, params: ModelParams) -> np.ndarray:
    om1, om2, big_delta = resolve_controls(params, t)
    lam1, lam2 = params.effective_couplings()
    d = eom_terms(tuple(state.psi), params.chi_rows, lam1, om1, lam2, om2,
                  params.delta, big_delta + params.delta, params.gamma)
    return np.array(d, dtype=complex)


def rhs_single(state: StateVector, t: float, params: ModelParams) -> np.ndarray:
    """d psi/dt for a single-channel run (A2 or AB path)."""
    if params.channel is Channel.DUAL:
        raise ConfigurationError("rhs_single requires a single-channel parameter set")
    if not isinstance(state, StateVector):
        state = StateVector(np.asarray(state))
    _check_inactive_zero(state, params)
    return _rhs(state, t, params)


def rhs_dual(state: StateVector, t: float, params: ModelParams) -> np.ndarray:
    """d psi/dt with both conversion channels active."""
    if params.channel is not Channel.DUAL:
        raise ConfigurationError("rhs_dual requires channel=DUAL")
    if not isinstance(state, StateVector):
        state = StateVector(np.asarray(state))
    return _rhs(state, t, params)


def rhs(state: StateVector, t: float, params: ModelParams) -> np.ndarray:
    """Channel-dispatching right-hand side."""
    if params.channel is Channel.DUAL:
        return rhs_dual(state, t, params)
    return rhs_single(state, t, params)


def conserved_atom_number(state: StateVector) -> float:
    """Total bound atom number N_a + N_b + 2(N_d1 + N_d2) + 3 N_g."""
    pops = state.populations() if isinstance(state, StateVector) else np.abs(np.asarray(state)) ** 2
    return float(np.dot(ATOM_CONTENT, pops))


def atom_a_number(state: StateVector) -> float:
    """A atoms bound in all species: N_a + 2 N_d1 + N_d2 + 2 N_g."""
    return float(np.dot(A_ATOM_CONTENT, state.populations()))


def atom_b_number(state: StateVector) -> float:
    """B atoms bound in all species: N_b + N_d2 + N_g."""
    return float(np.dot(B_ATOM_CONTENT, state.populations()))


def realify(psi: np.ndarray, channel: Channel) -> np.ndarray:
    """Pack the active complex fields into interleaved (re, im) doubles."""
    act = channel.active_fields
    y = np.empty(2 * len(act))
    for k, f in enumerate(act):
        y[2 * k] = psi[f].real
        y[2 * k + 1] = psi[f].imag
    return y


def complexify(y: np.ndarray, channel: Channel) -> np.ndarray:
    """Inverse of realify; inactive fields come back as exact zeros."""
    act = channel.active_fields
    psi = np.zeros(5, dtype=complex)
    for k, f in enumerate(act):
        psi[f] = complex(y[2 * k], y[2 * k + 1])
    return psi
