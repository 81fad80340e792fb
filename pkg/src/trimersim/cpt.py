"""Dark-state algebra and the resonance-tracking detuning.

The conversion dynamics admits steady states with empty dimer modes whenever
the pump and conversion amplitudes satisfy a phase-matching (two-photon
resonance) condition.  This module provides the closed-form steady-state
populations for the single channels and the dual channel, reconstructs the
corresponding amplitudes, and solves the resonance condition for the
photoassociation detuning so the dark state stays stationary despite the
collisional mean-field shifts.

The low-level formula helpers are written against generic real scalars so
they can be evaluated both in float64 (fast path) and in mpmath precision
(stability analysis).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateChannelError, DomainError
from .model import (
    Channel,
    FixedDetuning,
    ModelParams,
    StateVector,
)

#: Ideal conversion limit: one trimer per three atoms.
IDEAL_TRIMER_YIELD = 1.0 / 3.0


# ---------------------------------------------------------------------------
# scalar-generic closed forms
# ---------------------------------------------------------------------------

def single_trimer_fraction(eta, k):
    """Steady-state trimer population for one channel: (k eta^2)/(3 (1 + k eta^2)).

    k = 4 for the homonuclear (A2) path, k = 1 for the heteronuclear (AB)
    path; the factor difference comes from the two indistinguishable atoms in
    the A2 dimer.
    """
    x = k * eta * eta
    return x / (3.0 * (1.0 + x))


def dual_populations(eta1, eta2):
    """(n_a, n_b, n_g) of the two-channel steady state for finite ratios."""
    den = eta1 + eta2 + 3.0 * eta1 * (eta2 * eta2)
    n_b = eta1 / den
    n_a = eta2 / den
    n_g = eta1 * (eta2 * eta2) / den
    return n_a, n_b, n_g


def resonance_delta_single(chi_rows, n_g, n_a, delta, density=1.0):
    """Detuning that freezes a single-channel dark state (stoichiometric mix,
    so the B population is slaved to n_a/2 and does not appear explicitly)."""
    c_g = 2.0 * (2.0 * chi_rows[0][4] + chi_rows[1][4] - chi_rows[4][4]) * density * n_g
    c_a = (4.0 * chi_rows[0][0] - 2.0 * chi_rows[0][4] + 4.0 * chi_rows[0][1]
           + chi_rows[1][1] - chi_rows[1][4]) * density * n_a
    return -delta + c_g + c_a


def resonance_delta_general(chi_rows, n_a, n_b, n_g, delta, density=1.0):
    """Detuning from the phase-matching condition 2*phi_a + phi_b = phi_g.

    phi_i are the collisional phase-rotation rates of the dark-state
    amplitudes (dimers empty).  Both conversion paths consume two A atoms and
    one B atom per trimer, so they impose this same condition.
    """
    two_n = 2.0 * density
    phi_a = two_n * (chi_rows[0][0] * n_a + chi_rows[0][1] * n_b + chi_rows[0][4] * n_g)
    phi_b = two_n * (chi_rows[1][0] * n_a + chi_rows[1][1] * n_b + chi_rows[1][4] * n_g)
    phi_g_chi = two_n * (chi_rows[4][0] * n_a + chi_rows[4][1] * n_b + chi_rows[4][4] * n_g)
    return 2.0 * phi_a + phi_b - phi_g_chi - delta


# ---------------------------------------------------------------------------
# public dark-state API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DarkStateSolution:
    """Steady state with empty dimer modes.

    n_d is identically zero; amplitudes are real and non-negative with the
    dimer slots zeroed.  eta1/eta2 record the coupling ratios that produced
    the solution (None for an inactive channel, math.inf for the closed-pump
    limit).
    """

    n_a: float
    n_b: float
    n_d: float
    n_g: float
    amplitudes: StateVector
    eta1: float | None
    eta2: float | None


def _solution_from_populations(n_a, n_b, n_g, eta1, eta2) -> DarkStateSolution:
    amp = StateVector.from_amplitudes(
        psi_a=math.sqrt(max(n_a, 0.0)),
        psi_b=math.sqrt(max(n_b, 0.0)),
        psi_g=math.sqrt(max(n_g, 0.0)),
    )
    return DarkStateSolution(n_a=float(n_a), n_b=float(n_b), n_d=0.0, n_g=float(n_g),
                             amplitudes=amp, eta1=eta1, eta2=eta2)


def _check_ratio(eta, name: str) -> float:
    eta = float(eta)
    if math.isnan(eta) or eta < 0.0:
        raise DomainError(f"{name} must be >= 0; no dark state exists for negative ratios")
    return eta


def dark_state_single(eta: float, path: Channel) -> DarkStateSolution:
    """Single-channel dark state at coupling ratio eta = lambda/Omega.

    path selects the intermediate dimer: Channel.AA_ONLY or Channel.AB_ONLY.
    math.inf is accepted as the closed-pump limit (full conversion, n_g=1/3).
    """
    if path not in (Channel.AA_ONLY, Channel.AB_ONLY):
        raise DomainError("path must be Channel.AA_ONLY or Channel.AB_ONLY")
    eta = _check_ratio(eta, "eta")
    if math.isinf(eta):
        n_g = IDEAL_TRIMER_YIELD
    else:
        k = 4.0 if path is Channel.AA_ONLY else 1.0
        n_g = single_trimer_fraction(eta, k)
    n_a = 2.0 / 3.0 - 2.0 * n_g
    n_b = 1.0 / 3.0 - n_g
    eta1 = eta if path is Channel.AA_ONLY else None
    eta2 = eta if path is Channel.AB_ONLY else None
    return _solution_from_populations(n_a, n_b, n_g, eta1, eta2)


def dark_state_dual(eta1: float, eta2: float) -> DarkStateSolution:
    """Two-channel dark state at coupling ratios (eta1, eta2)."""
    eta1 = _check_ratio(eta1, "eta1")
    eta2 = _check_ratio(eta2, "eta2")
    if eta1 == 0.0:
        raise DegenerateChannelError(
            "eta1 = 0 closes the A2 channel; use dark_state_single with the AB path")
    if math.isinf(eta1) and math.isinf(eta2):
        raise DomainError("joint limit eta1, eta2 -> inf is direction-dependent")
    if math.isinf(eta2):
        n_a, n_b, n_g = 0.0, 0.0, IDEAL_TRIMER_YIELD
    elif math.isinf(eta1):
        den = 1.0 + 3.0 * eta2 * eta2
        n_a, n_b, n_g = 0.0, 1.0 / den, eta2 * eta2 / den
    else:
        n_a, n_b, n_g = dual_populations(eta1, eta2)
    return _solution_from_populations(n_a, n_b, n_g, eta1, eta2)


def channel_ratio(eta1: float, eta2: float) -> float:
    """Ratio R = eta2/eta1 of the two coupling ratios."""
    if eta1 == 0.0:
        raise DomainError("channel ratio undefined for eta1 = 0")
    r = eta2 / eta1
    if r < 0.0:
        raise DomainError(f"R = {r} < 0: no dark-state solution in this region")
    return r


def resonance_detuning(params: ModelParams, sol: DarkStateSolution) -> float:
    """Detuning Delta that makes the dark state stationary.

    For single-channel runs this is the stoichiometric-mix resonance formula.
    For dual-channel runs both stationarity conditions are solved jointly in
    the least-squares sense; because the two paths share the 2A + B -> A2B
    stoichiometry the conditions coincide and the residual vanishes
    analytically (see resonance_residual).
    """
    chi = params.chi_rows
    if params.channel is Channel.DUAL:
        targets = _dual_delta_targets(chi, sol, params.delta)
        # least-squares solution of [1, 1]^T * Delta = targets
        return 0.5 * (targets[0] + targets[1])
    return resonance_delta_single(chi, sol.n_g, sol.n_a, params.delta)


def _dual_delta_targets(chi_rows, sol: DarkStateSolution, delta: float) -> tuple[float, float]:
    target = resonance_delta_general(chi_rows, sol.n_a, sol.n_b, sol.n_g, delta)
    return (target, target)


def resonance_residual(params: ModelParams, sol: DarkStateSolution, delta_value: float) -> float:
    """Norm of the per-channel stationarity defects at the given detuning.

    Each defect is the phase-matching mismatch 2*phi_a + phi_b - phi_g scaled
    by the corresponding dark-state coupling product, i.e. the rate at which
    the dimer amplitude would start to grow.
    """
    chi = params.chi_rows
    two_n = 2.0
    n_a, n_b, n_g = sol.n_a, sol.n_b, sol.n_g
    phi_a = two_n * (chi[0][0] * n_a + chi[0][1] * n_b + chi[0][4] * n_g)
    phi_b = two_n * (chi[1][0] * n_a + chi[1][1] * n_b + chi[1][4] * n_g)
    phi_g = (two_n * (chi[4][0] * n_a + chi[4][1] * n_b + chi[4][4] * n_g)
             + delta_value + params.delta)
    mismatch = 2.0 * phi_a + phi_b - phi_g
    psi_a = sol.amplitudes.psi_a.real
    psi_b = sol.amplitudes.psi_b.real
    psi_g = sol.amplitudes.psi_g.real
    lam1, lam2 = params.effective_couplings()
    r1 = lam1 * psi_a * psi_a * mismatch
    r2 = lam2 * psi_a * psi_b * mismatch if params.channel.uses_channel2 else 0.0
    return math.hypot(r1, r2)


# ---------------------------------------------------------------------------
# instantaneous dark state along a pulse schedule
# ---------------------------------------------------------------------------

def instantaneous_ratios(params: ModelParams, t: float) -> tuple[float | None, float | None]:
    """eta_l(t) = lambda_l / Omega_l(t) for the active channels.

    A vanishing pulse maps to math.inf (the closed-pump limit), never to a
    floating-point division error.
    """
    eta1 = eta2 = None
    if params.channel.uses_channel1:
        om1 = params.omega1(t)
        eta1 = params.lambda1 / om1 if om1 > 0.0 else math.inf
    if params.channel.uses_channel2:
        om2 = params.omega2(t)
        eta2 = params.lambda2 / om2 if om2 > 0.0 else math.inf
    return eta1, eta2


def instantaneous_dark_state(params: ModelParams, t: float) -> DarkStateSolution:
    """Dark state evaluated at the instantaneous coupling ratios eta_l(t)."""
    eta1, eta2 = instantaneous_ratios(params, t)
    if params.channel is Channel.AA_ONLY:
        return dark_state_single(eta1, Channel.AA_ONLY)
    if params.channel is Channel.AB_ONLY:
        return dark_state_single(eta2, Channel.AB_ONLY)
    return dark_state_dual(eta1, eta2)


def tracking_detuning(params: ModelParams, t: float) -> float:
    """Resonance detuning along the intended adiabatic evolution."""
    return resonance_detuning(params, instantaneous_dark_state(params, t))


@dataclass(frozen=True, eq=False)
class CptCurve:
    """Reference dark-state populations sampled along the pulse schedule."""

    t: np.ndarray
    n_g: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray

    def __post_init__(self):
        for name in ("t", "n_g", "n_a", "n_b"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.t.size


def cpt_reference_curve(params: ModelParams, window: tuple[float, float],
                        stride: float) -> CptCurve:
    """Ideal dark-state trimer population swept along the pulse schedule.

    Samples run from window start to window end inclusive at the given
    stride; the final point is always included.
    """
    t0, t1 = float(window[0]), float(window[1])
    if not (t1 > t0):
        raise ConfigurationError("window must satisfy t1 > t0")
    if not (stride > 0.0):
        raise ConfigurationError("stride must be > 0")
    times = sample_times(t0, t1, stride)
    n_g = np.empty(times.size)
    n_a = np.empty(times.size)
    n_b = np.empty(times.size)
    for i, t in enumerate(times):
        sol = instantaneous_dark_state(params, float(t))
        n_g[i] = sol.n_g
        n_a[i] = sol.n_a
        n_b[i] = sol.n_b
    return CptCurve(t=times, n_g=n_g, n_a=n_a, n_b=n_b)


def sample_times(t0: float, t1: float, stride: float) -> np.ndarray:
    """Strictly increasing sample grid covering [t0, t1] with both endpoints."""
    n_inner = int(math.floor((t1 - t0) / stride + 1e-9))
    ts = t0 + stride * np.arange(n_inner + 1)
    ts = ts[ts < t1 - 1e-12 * max(abs(t0), abs(t1), 1.0)]
    return np.append(ts, t1)


def dark_state_at_fixed_pulses(params: ModelParams, t: float) -> tuple[DarkStateSolution, float]:
    """(dark state, resonance detuning) for pulses frozen at their values at t."""
    sol = instantaneous_dark_state(params, t)
    return sol, resonance_detuning(params, sol)


def frozen_params(params: ModelParams, t: float) -> ModelParams:
    """Copy of params with both pulses and the detuning frozen at time t.

    The returned parameter set makes the instantaneous dark state an exact
    fixed point of the flow (up to global phase rotations).
    """
    from dataclasses import replace

    from .model import ConstantPulse

    sol, delta_value = dark_state_at_fixed_pulses(params, t)
    kwargs = {"delta_mode": FixedDetuning(delta_value)}
    if params.channel.uses_channel1:
        kwargs["omega1"] = ConstantPulse(params.omega1(t))
    if params.channel.uses_channel2:
        kwargs["omega2"] = ConstantPulse(params.omega2(t))
    return replace(params, **kwargs)
