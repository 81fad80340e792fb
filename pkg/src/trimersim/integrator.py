"""Adaptive embedded Runge-Kutta integration of the field equations.

The complex system is propagated as 2M interleaved real components
(M = 4 for single-channel runs, M = 5 dual) with a Dormand-Prince 5(4)
pair, per-component mixed absolute/relative error control, and dense output
by cubic Hermite interpolation between accepted steps.  The hot loop is
compiled with numba when available; an identical pure-Python fallback keeps
results reproducible without it.

Controls (both pulses and, under CPT tracking, the detuning) are re-evaluated
at every stage time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError, InvalidStateError
from .model import (
    ATOM_CONTENT,
    Channel,
    ConstantPulse,
    CptTracking,
    FixedDetuning,
    ModelParams,
    RatioScaledPulse,
    SechPulse,
    StateVector,
    TabulatedPulse,
    _check_inactive_zero,
    complexify,
    realify,
    resolve_controls,
)
from .cpt import sample_times

try:
    import numba

    def _jit(func):
        return numba.njit(cache=True, nogil=True)(func)

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    def _jit(func):
        return func

    NUMBA_ENABLED = False


# Dormand-Prince 5(4) tableau (FSAL; 5th-order solution is propagated).
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_STATUS_OK = 0
_STATUS_UNDERFLOW = 1
_STATUS_NONFINITE = 2
_STATUS_MAXSTEPS = 3


@_jit
def _sech_f(x):
    ax = abs(x)
    e = math.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


@_jit
def _pulse_f(code, a, b, times, values, t):
    if code == 0:
        return a * _sech_f(t / b)
    if code == 1:
        return a
    if code == 2:
        return np.interp(t, times, values)
    return a * _sech_f(t / b) / np.interp(t, times, values)


@_jit
def _tracking_delta_f(chi, channel_code, lam1, lam2, om1, om2, delta):
    if channel_code == 0:
        if om1 > 0.0:
            eta = lam1 / om1
            x = 4.0 * eta * eta
            n_g = x / (3.0 * (1.0 + x))
        else:
            n_g = 1.0 / 3.0
        n_a = 2.0 / 3.0 - 2.0 * n_g
        return (-delta
                + 2.0 * (2.0 * chi[0, 4] + chi[1, 4] - chi[4, 4]) * n_g
                + (4.0 * chi[0, 0] - 2.0 * chi[0, 4] + 4.0 * chi[0, 1]
                   + chi[1, 1] - chi[1, 4]) * n_a)
    if channel_code == 1:
        if om2 > 0.0:
            eta = lam2 / om2
            x = eta * eta
            n_g = x / (3.0 * (1.0 + x))
        else:
            n_g = 1.0 / 3.0
        n_a = 2.0 / 3.0 - 2.0 * n_g
        return (-delta
                + 2.0 * (2.0 * chi[0, 4] + chi[1, 4] - chi[4, 4]) * n_g
                + (4.0 * chi[0, 0] - 2.0 * chi[0, 4] + 4.0 * chi[0, 1]
                   + chi[1, 1] - chi[1, 4]) * n_a)
    # dual channel: phase matching 2*phi_a + phi_b = phi_g at the dark state
    if om1 > 0.0 and om2 > 0.0:
        eta1 = lam1 / om1
        eta2 = lam2 / om2
        den = eta1 + eta2 + 3.0 * eta1 * (eta2 * eta2)
        n_b = eta1 / den
        n_a = eta2 / den
        n_g = eta1 * (eta2 * eta2) / den
    elif om2 > 0.0:
        eta2 = lam2 / om2
        den = 1.0 + 3.0 * eta2 * eta2
        n_b = 1.0 / den
        n_a = 0.0
        n_g = eta2 * eta2 / den
    else:
        n_b = 0.0
        n_a = 0.0
        n_g = 1.0 / 3.0
    phi_a = 2.0 * (chi[0, 0] * n_a + chi[0, 1] * n_b + chi[0, 4] * n_g)
    phi_b = 2.0 * (chi[1, 0] * n_a + chi[1, 1] * n_b + chi[1, 4] * n_g)
    phi_g_chi = 2.0 * (chi[4, 0] * n_a + chi[4, 1] * n_b + chi[4, 4] * n_g)
    return 2.0 * phi_a + phi_b - phi_g_chi - delta


@_jit
def _rhs_f(t, y, out, act, chi, par,
           p1code, p1a, p1b, p1t, p1v,
           p2code, p2a, p2b, p2t, p2v):
    lam1 = par[0]
    lam2 = par[1]
    gamma = par[2]
    delta = par[3]
    om1 = _pulse_f(p1code, p1a, p1b, p1t, p1v, t) if par[8] == 1.0 else 0.0
    om2 = _pulse_f(p2code, p2a, p2b, p2t, p2v, t) if par[9] == 1.0 else 0.0
    if par[4] == 1.0:
        big_delta = _tracking_delta_f(chi, int(par[6]), lam1, lam2, om1, om2, delta)
    else:
        big_delta = par[5]
    delta_total = big_delta + delta

    pa = complex(0.0, 0.0)
    pb = complex(0.0, 0.0)
    pd1 = complex(0.0, 0.0)
    pd2 = complex(0.0, 0.0)
    pg = complex(0.0, 0.0)
    m = act.shape[0]
    for k in range(m):
        f = act[k]
        c = complex(y[2 * k], y[2 * k + 1])
        if f == 0:
            pa = c
        elif f == 1:
            pb = c
        elif f == 2:
            pd1 = c
        elif f == 3:
            pd2 = c
        else:
            pg = c

    na = pa.real * pa.real + pa.imag * pa.imag
    nb = pb.real * pb.real + pb.imag * pb.imag
    nd1 = pd1.real * pd1.real + pd1.imag * pd1.imag
    nd2 = pd2.real * pd2.real + pd2.imag * pd2.imag
    ng = pg.real * pg.real + pg.imag * pg.imag
    two_n = 2.0 * par[7]
    ca = two_n * (chi[0, 0] * na + chi[0, 1] * nb + chi[0, 2] * nd1
                  + chi[0, 3] * nd2 + chi[0, 4] * ng)
    cb = two_n * (chi[1, 0] * na + chi[1, 1] * nb + chi[1, 2] * nd1
                  + chi[1, 3] * nd2 + chi[1, 4] * ng)
    cd1 = two_n * (chi[2, 0] * na + chi[2, 1] * nb + chi[2, 2] * nd1
                   + chi[2, 3] * nd2 + chi[2, 4] * ng)
    cd2 = two_n * (chi[3, 0] * na + chi[3, 1] * nb + chi[3, 2] * nd1
                   + chi[3, 3] * nd2 + chi[3, 4] * ng)
    cg = two_n * (chi[4, 0] * na + chi[4, 1] * nb + chi[4, 2] * nd1
                  + chi[4, 3] * nd2 + chi[4, 4] * ng)
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

    for k in range(m):
        f = act[k]
        if f == 0:
            d = da
        elif f == 1:
            d = db
        elif f == 2:
            d = dd1
        elif f == 3:
            d = dd2
        else:
            d = dg
        out[2 * k] = d.real
        out[2 * k + 1] = d.imag


@_jit
def _advance_f(t0, t1, y0, rtol, atol, h0, hmax, hmin, max_steps, ts, samples,
               act, chi, par,
               p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v):
    n = y0.shape[0]
    ns = ts.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)

    _rhs_f(t0, y, k1, act, chi, par, p1code, p1a, p1b, p1t, p1v,
           p2code, p2a, p2b, p2t, p2v)
    n_evals = 1
    n_steps = 0
    n_accepted = 0
    t = t0
    h = h0
    si = 0
    while si < ns and ts[si] <= t0:
        for i in range(n):
            samples[si, i] = y[i]
        si += 1

    status = _STATUS_OK
    nonfinite_reject = False
    while t < t1:
        if h < hmin:
            status = _STATUS_NONFINITE if nonfinite_reject else _STATUS_UNDERFLOW
            break
        if n_steps >= max_steps:
            status = _STATUS_MAXSTEPS
            break
        ht = h
        if t + h >= t1:
            ht = t1 - t

        for i in range(n):
            ytmp[i] = y[i] + ht * (A21 * k1[i])
        _rhs_f(t + C2 * ht, ytmp, k2, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + ht * (A31 * k1[i] + A32 * k2[i])
        _rhs_f(t + C3 * ht, ytmp, k3, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + ht * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs_f(t + C4 * ht, ytmp, k4, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + ht * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs_f(t + C5 * ht, ytmp, k5, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + ht * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                   + A64 * k4[i] + A65 * k5[i])
        _rhs_f(t + ht, ytmp, k6, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ynew[i] = y[i] + ht * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                   + A75 * k5[i] + A76 * k6[i])
        _rhs_f(t + ht, ynew, k7, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        n_evals += 6
        n_steps += 1

        err = 0.0
        finite = True
        for i in range(n):
            if not math.isfinite(ynew[i]):
                finite = False
                break
            e = ht * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                      + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            r = e / sc
            err += r * r
        if finite:
            err = math.sqrt(err / n)
            finite = math.isfinite(err)

        if not finite:
            nonfinite_reject = True
            h = ht * 0.2
            continue
        nonfinite_reject = False

        if err <= 1.0:
            tnew = t + ht if t + h < t1 else t1
            while si < ns and ts[si] <= tnew:
                theta = (ts[si] - t) / ht
                t2 = theta * theta
                t3 = t2 * theta
                h00 = 2.0 * t3 - 3.0 * t2 + 1.0
                h10 = t3 - 2.0 * t2 + theta
                h01 = -2.0 * t3 + 3.0 * t2
                h11 = t3 - t2
                for i in range(n):
                    samples[si, i] = (h00 * y[i] + h10 * ht * k1[i]
                                      + h01 * ynew[i] + h11 * ht * k7[i])
                si += 1
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            t = tnew
            n_accepted += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(ht * fac, hmax)
        else:
            h = ht * max(0.2, 0.9 * err ** -0.2)

    return si, t, status, n_steps, n_accepted, n_evals


@_jit
def _fixed_f(t0, t1, n_fixed, y, act, chi, par,
             p1code, p1a, p1b, p1t, p1v,
             p2code, p2a, p2b, p2t, p2v):
    n = y.shape[0]
    h = (t1 - t0) / n_fixed
    ytmp = np.empty(n)
    ynew = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    _rhs_f(t0, y, k1, act, chi, par, p1code, p1a, p1b, p1t, p1v,
           p2code, p2a, p2b, p2t, p2v)
    for step in range(n_fixed):
        t = t0 + step * h
        for i in range(n):
            ytmp[i] = y[i] + h * (A21 * k1[i])
        _rhs_f(t + C2 * h, ytmp, k2, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        _rhs_f(t + C3 * h, ytmp, k3, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs_f(t + C4 * h, ytmp, k4, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs_f(t + C5 * h, ytmp, k5, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        _rhs_f(t + h, ytmp, k6, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                  + A75 * k5[i] + A76 * k6[i])
        _rhs_f(t + h, ynew, k1, act, chi, par, p1code, p1a, p1b, p1t, p1v,
               p2code, p2a, p2b, p2t, p2v)
        for i in range(n):
            y[i] = ynew[i]
            if not math.isfinite(y[i]):
                return _STATUS_NONFINITE
    return _STATUS_OK


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegratorConfig:
    """Error control and sampling settings."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    initial_step: float | None = None
    max_step: float = math.inf
    min_step: float = 1e-12
    sample_stride: float = 0.5
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ConfigurationError("tolerances must be > 0")
        if not (0.0 < self.min_step < self.max_step):
            raise ConfigurationError("steps must satisfy 0 < min_step < max_step")
        if self.initial_step is not None and not (self.initial_step > 0.0):
            raise ConfigurationError("initial_step must be > 0 when given")
        if not (self.sample_stride > 0.0):
            raise ConfigurationError("sample_stride must be > 0")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense samples of a run: state, populations, controls and invariants."""

    t: np.ndarray
    psi: np.ndarray
    populations: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    delta: np.ndarray
    conserved: np.ndarray
    n_steps: int
    n_rhs_evals: int
    complete: bool = True
    diagnostic: str | None = None

    def __post_init__(self):
        for name in ("t", "psi", "populations", "omega1", "omega2", "delta", "conserved"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.t.size

    def population(self, species) -> np.ndarray:
        return self.populations[:, int(species)]

    @property
    def final_state(self) -> StateVector:
        return StateVector(self.psi[-1])

    @property
    def final_populations(self) -> np.ndarray:
        return self.populations[-1]


def _encode_pulse(pulse):
    empty = np.zeros(1)
    if pulse is None:
        return 1, 0.0, 0.0, empty, empty
    if isinstance(pulse, SechPulse):
        return 0, pulse.amplitude, pulse.width, empty, empty
    if isinstance(pulse, ConstantPulse):
        return 1, pulse.value, 0.0, empty, empty
    if isinstance(pulse, TabulatedPulse):
        return 2, 0.0, 0.0, np.array(pulse.times), np.array(pulse.values)
    if isinstance(pulse, RatioScaledPulse):
        return (3, pulse.scale * pulse.base_amplitude, pulse.base_width,
                np.array(pulse.ratio_times), np.array(pulse.ratio_values))
    raise ConfigurationError(f"unsupported pulse schedule type: {type(pulse).__name__}")


def _encode(params: ModelParams):
    channel_code = {Channel.AA_ONLY: 0, Channel.AB_ONLY: 1, Channel.DUAL: 2}[params.channel]
    lam1, lam2 = params.effective_couplings()
    tracking = isinstance(params.delta_mode, CptTracking)
    fixed_value = params.delta_mode.value if isinstance(params.delta_mode, FixedDetuning) else 0.0
    par = np.array([
        lam1, lam2, params.gamma, params.delta,
        1.0 if tracking else 0.0, fixed_value,
        float(channel_code), 1.0,
        1.0 if params.channel.uses_channel1 else 0.0,
        1.0 if params.channel.uses_channel2 else 0.0,
    ])
    act = np.array(params.channel.active_fields, dtype=np.int64)
    chi = np.ascontiguousarray(params.chi.chi)
    p1 = _encode_pulse(params.omega1 if params.channel.uses_channel1 else None)
    p2 = _encode_pulse(params.omega2 if params.channel.uses_channel2 else None)
    return act, chi, par, p1, p2


def _check_pulse_coverage(params: ModelParams, t0: float, t1: float) -> None:
    for active, pulse in ((params.channel.uses_channel1, params.omega1),
                          (params.channel.uses_channel2, params.omega2)):
        if active and isinstance(pulse, TabulatedPulse):
            if t0 < pulse.times[0] or t1 > pulse.times[-1]:
                raise ConfigurationError(
                    "tabulated pulse does not cover the integration window")


def _initial_step(y0, f0, rtol, atol, span, hmax):
    sc = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / sc) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / sc) ** 2)))
    if d0 < 1e-10 or d1 < 1e-10:
        h0 = 1e-6 * span
    else:
        h0 = 0.01 * d0 / d1
    return min(h0, 0.1 * span, hmax)


def integrate(params: ModelParams, initial: StateVector, window: tuple[float, float],
              config: IntegratorConfig | None = None) -> Trajectory:
    """Propagate the state over [t0, t1] with adaptive error control.

    Raises DivergenceError when the state becomes non-finite; returns a
    partial trajectory with a diagnostic when step-size control underflows
    (a stiffness/blow-up signal).
    """
    if config is None:
        config = IntegratorConfig()
    if not isinstance(initial, StateVector):
        initial = StateVector(np.asarray(initial))
    t0, t1 = float(window[0]), float(window[1])
    if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
        raise ConfigurationError("window must be finite with t1 > t0")
    _check_inactive_zero(initial, params)
    _check_pulse_coverage(params, t0, t1)

    act, chi, par, p1, p2 = _encode(params)
    y0 = realify(initial.psi, params.channel)
    ts = sample_times(t0, t1, config.sample_stride)
    samples = np.empty((ts.size, y0.size))

    f0 = np.empty_like(y0)
    _rhs_f(t0, y0, f0, act, chi, par, *p1, *p2)
    if not np.all(np.isfinite(f0)):
        raise DivergenceError("right-hand side non-finite at the initial state", t0)
    span = t1 - t0
    hmax = min(config.max_step, span)
    h0 = config.initial_step if config.initial_step is not None else _initial_step(
        y0, f0, config.rel_tol, config.abs_tol, span, hmax)
    h0 = min(h0, hmax)

    si, t_reached, status, n_steps, n_accepted, n_evals = _advance_f(
        t0, t1, y0, config.rel_tol, config.abs_tol, h0, hmax, config.min_step,
        config.max_steps, ts, samples, act, chi, par, *p1, *p2)
    n_evals += 1  # the probe evaluation above

    if status == _STATUS_NONFINITE:
        raise DivergenceError(
            f"state became non-finite; last good time t={t_reached:.6g}", t_reached)

    diagnostic = None
    complete = status == _STATUS_OK
    if status == _STATUS_UNDERFLOW:
        diagnostic = (f"step size underflow at t={t_reached:.6g} "
                      f"(min_step={config.min_step:g}); stiffness or blow-up suspected")
    elif status == _STATUS_MAXSTEPS:
        diagnostic = f"step budget exhausted at t={t_reached:.6g}"

    ts = ts[:si]
    samples = samples[:si]
    n = ts.size
    psi = np.empty((n, 5), dtype=complex)
    for i in range(n):
        psi[i] = complexify(samples[i], params.channel)
    populations = np.abs(psi) ** 2
    omega1 = np.empty(n)
    omega2 = np.empty(n)
    delta = np.empty(n)
    for i, t in enumerate(ts):
        om1, om2, big_delta = resolve_controls(params, float(t))
        omega1[i] = om1
        omega2[i] = om2
        delta[i] = big_delta
    conserved = populations @ np.array(ATOM_CONTENT, dtype=float)
    return Trajectory(t=ts.copy(), psi=psi, populations=populations, omega1=omega1,
                      omega2=omega2, delta=delta, conserved=conserved,
                      n_steps=n_steps, n_rhs_evals=n_evals,
                      complete=complete, diagnostic=diagnostic)


def integrate_fixed_step(params: ModelParams, initial: StateVector,
                         window: tuple[float, float], n_steps: int) -> StateVector:
    """Final state after n_steps equal steps of the 5th-order formula.

    The workhorse behind order measurements; no error control, no sampling.
    """
    if n_steps < 1:
        raise ConfigurationError("n_steps must be >= 1")
    if not isinstance(initial, StateVector):
        initial = StateVector(np.asarray(initial))
    t0, t1 = float(window[0]), float(window[1])
    if not (t1 > t0):
        raise ConfigurationError("window must satisfy t1 > t0")
    _check_inactive_zero(initial, params)
    _check_pulse_coverage(params, t0, t1)
    act, chi, par, p1, p2 = _encode(params)
    y = realify(initial.psi, params.channel)
    status = _fixed_f(t0, t1, n_steps, y, act, chi, par, *p1, *p2)
    if status == _STATUS_NONFINITE:
        raise DivergenceError("state became non-finite during fixed-step run", t0)
    return StateVector(complexify(y, params.channel))


def order_check(params: ModelParams, initial: StateVector, window: tuple[float, float],
                n0: int = 32, levels: int = 3) -> float:
    """Measured convergence order of the propagating formula.

    Runs the fixed-step variant at n0, 2*n0, ... steps against a much finer
    self-reference and returns the mean slope of the error under step
    halving.  Returns math.inf when every error sits at round-off (e.g. a
    zero vector field).
    """
    finals = []
    for k in range(levels + 1):
        finals.append(realify(
            integrate_fixed_step(params, initial, window, n0 * 2 ** k).psi, params.channel))
    ref = realify(
        integrate_fixed_step(params, initial, window, n0 * 2 ** (levels + 2)).psi,
        params.channel)
    scale = math.sqrt(float(np.mean(ref ** 2))) + 1.0
    errs = [math.sqrt(float(np.mean((f - ref) ** 2))) for f in finals]
    orders = []
    for e_coarse, e_fine in zip(errs, errs[1:]):
        if e_coarse > 1e-13 * scale and e_fine > 1e-14 * scale:
            orders.append(math.log2(e_coarse / e_fine))
    if not orders:
        return math.inf
    return float(np.mean(orders))
