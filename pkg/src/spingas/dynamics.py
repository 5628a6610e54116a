"""Nonlinear mean-field dynamics of the ground-level density matrix.

The equation of motion combines the ground Hamiltonian commutator, the
optical channels of :mod:`spingas.optics`, isotropic spin destruction at a
rate Gamma (uniform relaxation toward the fully mixed state, the
wall/diffusion channel), and binary spin-exchange collisions acting on the
electron spin at a rate q*J:

    d rho/dt = -i [H_g, rho] + optics(rho) - Gamma (rho - Tr(rho)/16)
               + qJ [ phi(rho) - rho + sum_j M_j (rho S_j + S_j rho
                                                  - 2i (S x rho S)_j) ]

with phi(rho) = rho/4 + S.rho S and M = Tr(rho S).  The quadratic M-term
re-aligns the electron spin along the vapor's own mean spin; it conserves
Tr(F_z rho) exactly and is the only nonlinearity, so everything else is
precompiled into a single superoperator and integration runs in the real
coordinates of the coherence-projected subspace.

Projection modes follow the two truncation levels used for the production
phase diagrams: 'hyperfine' zeros the F=3 <-> F=4 blocks, and
'hyperfine+zeeman' additionally zeros all off-diagonal elements.  The
reported magnetization is M_z = Tr(rho F_z) / F_max, normalized so the
stretched states give +/-1.

Rate axes.  The pump intensity knob I and the exchange knob J are expressed
in calibrated axis units chosen to reproduce the reference experiment's
phase-diagram coordinates (critical pump rate near 1.4 Gamma on the
J = 2.3 Gamma contour, left knee near J = 1.7 Gamma):

* one axis unit of I corresponds to ``PUMP_AXIS_SCALE`` photon absorptions
  per second per unpolarized atom;
* one axis unit of J corresponds to ``EXCHANGE_AXIS_SCALE`` units of the
  model's exchange rate (the electron-spin collision rate is q_slowdown
  times that).

Both constants are package-level calibration conventions, playing the same
role as the empirical intensity-to-rate coefficients used to label the
measured diagrams; they rescale the axes only and do not affect topology,
exponents, or any other dimensionless prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .optics import (
    AtomSystem,
    CollisionParams,
    DopplerSpec,
    FieldCoupling,
    OpticalChannel,
    OpticalField,
    bias_field,
    cesium_collisions,
    cesium_doppler,
    couple_field,
    pump_field,
)
from .spin_algebra import AtomSpec, VectorOperator, cesium

MODE_FULL = "none"
MODE_HF = "hyperfine"
MODE_HFZ = "hyperfine+zeeman"
PROJECTION_MODES = (MODE_HFZ, MODE_HF, MODE_FULL)

GAMMA_BASE = 58.0  # 1/s, dark spin-destruction rate at the reference temperature

# Axis calibrations (see module docstring).
PUMP_AXIS_SCALE = 32.0
EXCHANGE_AXIS_SCALE = 5.0


def gamma_of_temperature(temperature_c: float, gamma0: float = GAMMA_BASE,
                         slope: float = 0.35, t_ref: float = 75.0) -> float:
    """Linear temperature law of the dark relaxation rate, 1/s."""
    return gamma0 + slope * (temperature_c - t_ref)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SimParams:
    """Complete parameter record of one simulation point.

    Field amplitudes are in the internal intensity unit; use
    :meth:`from_rates` to specify pump, exchange and bias strengths as rates
    in units of Gamma on the calibrated axes.  ``j_exchange`` is the model
    exchange rate J entering the equation as qJ.
    """

    atom: AtomSpec = field(default_factory=cesium)
    coll: CollisionParams = field(default_factory=cesium_collisions)
    doppler: DopplerSpec = field(default_factory=cesium_doppler)
    pump: OpticalField | None = None
    bias: OpticalField | None = None
    gamma: float = GAMMA_BASE
    j_exchange: float = 0.0
    b_z: float = 1.0
    projection_mode: str = MODE_HFZ
    seed_polarization: float = 1e-4
    light_shift: bool = False
    i_rate: float | None = None
    h_rate: float | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.j_exchange < 0:
            raise ValueError("j_exchange must be >= 0")
        if abs(self.seed_polarization) > 0.01:
            raise ValueError("|seed_polarization| must be <= 0.01")
        if self.projection_mode not in PROJECTION_MODES:
            raise ValueError(f"unknown projection mode {self.projection_mode!r}")

    @property
    def t1(self) -> float:
        return 1.0 / self.gamma

    @classmethod
    def from_rates(cls, i_over_gamma: float = 0.0, j_over_gamma: float = 0.0,
                   h_over_gamma: float = 0.0, bias_sign: int = +1,
                   gamma: float = GAMMA_BASE, **kwargs) -> "SimParams":
        """Build parameters from axis-rate ratios I/Gamma, J/Gamma, H/Gamma."""
        if i_over_gamma < 0 or j_over_gamma < 0:
            raise ValueError("axis rates I/Gamma and J/Gamma must be >= 0")
        base = cls(gamma=gamma,
                   j_exchange=EXCHANGE_AXIS_SCALE * j_over_gamma * gamma,
                   **kwargs)
        pump = None
        i_rate = i_over_gamma * gamma
        if i_over_gamma > 0:
            pump = pump_field(i_rate / alignment_rate_unit(base))
        bias = None
        h_rate = h_over_gamma * gamma
        if h_over_gamma != 0.0:
            sign = bias_sign if h_over_gamma > 0 else -bias_sign
            shape = bias_field(1.0, sign=sign)
            bias = shape.scaled(abs(h_rate) / bias_rate_unit(base, shape))
        return replace(base, pump=pump, bias=bias, i_rate=i_rate, h_rate=h_rate)

    def fields(self) -> list[OpticalField]:
        return [f for f in (self.pump, self.bias)
                if f is not None and f.amplitude_sq > 0]


@dataclass
class Trajectory:
    """Recorded magnetization history M_z(t) = Tr(rho F_z)/F_max."""

    times: np.ndarray
    magnetization: np.ndarray
    final_state: np.ndarray
    steady: bool

    def response_crossing(self, fraction_of_final: float) -> float | None:
        """First time |M| crosses ``fraction_of_final`` x |M(final)|,
        linearly interpolated between accepted steps."""
        target = fraction_of_final * abs(self.magnetization[-1])
        absm = np.abs(self.magnetization)
        above = np.nonzero(absm >= target)[0]
        if len(above) == 0:
            return None
        k = above[0]
        if k == 0:
            return float(self.times[0])
        t0, t1 = self.times[k - 1], self.times[k]
        m0, m1 = absm[k - 1], absm[k]
        if m1 == m0:
            return float(t1)
        return float(t0 + (target - m0) / (m1 - m0) * (t1 - t0))


class Subspace:
    """Real coordinates of the coherence-projected Hermitian matrices."""

    def __init__(self, mode: str, basis_g):
        if mode not in PROJECTION_MODES:
            raise ValueError(f"unknown projection mode {mode!r}")
        self.mode = mode
        self.dim = basis_g.dimension
        f_of = [f for f, _ in basis_g.states]
        pairs = []
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if mode == MODE_FULL or (mode == MODE_HF and f_of[i] == f_of[j]):
                    pairs.append((i, j))
        self.pairs = pairs
        self.n = self.dim + 2 * len(pairs)
        self._pi = np.array([p[0] for p in pairs], dtype=int)
        self._pj = np.array([p[1] for p in pairs], dtype=int)

    def to_matrix(self, s: np.ndarray) -> np.ndarray:
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[np.arange(self.dim), np.arange(self.dim)] = s[:self.dim]
        if self.pairs:
            np_ = len(self.pairs)
            re = s[self.dim:self.dim + np_]
            im = s[self.dim + np_:]
            rho[self._pi, self._pj] = re + 1j * im
            rho[self._pj, self._pi] = re - 1j * im
        return rho

    def from_matrix(self, rho: np.ndarray) -> np.ndarray:
        s = np.empty(self.n)
        s[:self.dim] = np.diag(rho).real
        if self.pairs:
            np_ = len(self.pairs)
            herm_upper = 0.5 * (rho[self._pi, self._pj] + rho[self._pj, self._pi].conj())
            s[self.dim:self.dim + np_] = herm_upper.real
            s[self.dim + np_:] = herm_upper.imag
        return s

    def project_matrix(self, rho: np.ndarray) -> np.ndarray:
        return self.to_matrix(self.from_matrix(rho))

    def min_eigenvalue(self, s: np.ndarray) -> float:
        if self.mode == MODE_HFZ:
            return float(s[:self.dim].min())
        return float(np.linalg.eigvalsh(self.to_matrix(s)).min())


def project_coherences(rho_g: np.ndarray, mode: str, basis_g) -> np.ndarray:
    """Zero the rapidly oscillating coherences of a ground-level matrix.

    'hyperfine' removes the blocks between the two hyperfine manifolds;
    'hyperfine+zeeman' additionally removes off-diagonals within each
    manifold.  The diagonal, and hence the trace, is untouched.
    """
    sub = Subspace(mode, basis_g)
    out = sub.project_matrix(np.asarray(rho_g, dtype=complex))
    if not math.isclose(np.trace(out).real, np.trace(rho_g).real,
                        rel_tol=0, abs_tol=1e-12):
        raise AssertionError("coherence projection moved the trace")
    return out


def exchange_phi(rho: np.ndarray, s_ops: VectorOperator) -> np.ndarray:
    """phi(rho) = rho/4 + S.rho S, the nuclear-preserving collision kernel."""
    out = 0.25 * rho.astype(complex)
    for s in s_ops.matrices:
        out = out + s @ rho @ s
    return out


def _exchange_vector_bracket(rho: np.ndarray, s_ops: VectorOperator) -> list[np.ndarray]:
    """Hermitian brackets rho S_j + S_j rho - 2i (S x rho S)_j for j=x,y,z."""
    sx, sy, sz = s_ops.matrices
    srs = [[sa @ rho @ sb for sb in (sx, sy, sz)] for sa in (sx, sy, sz)]
    out = []
    for j, (sj, (k, l)) in enumerate(zip((sx, sy, sz), ((1, 2), (2, 0), (0, 1)))):
        cross = srs[k][l] - srs[l][k]
        out.append(rho @ sj + sj @ rho - 2j * cross)
    return out


def spin_exchange_term(rho_g: np.ndarray, qj: float, s_ops: VectorOperator) -> np.ndarray:
    """Spin-exchange collision term at electron-spin rate qj.

    Conserves Tr(F_z rho) and vanishes on the fully mixed state.  The
    mean-spin feedback enters with the sign that restores the electron spin
    along the vapor average; the collision-conservation check in the test
    suite pins that sign."""
    if qj == 0.0:
        return np.zeros_like(rho_g, dtype=complex)
    rho = np.asarray(rho_g, dtype=complex)
    m = np.array([np.trace(rho @ s).real for s in s_ops.matrices])
    out = exchange_phi(rho, s_ops) - rho
    for mj, bracket in zip(m, _exchange_vector_bracket(rho, s_ops)):
        if mj != 0.0:
            out = out + mj * bracket
    return qj * out


class CompiledModel:
    """Fully assembled generator of one parameter point.

    ``rhs_coords`` evaluates d(state)/dt in the real subspace coordinates
    using only matrix-vector products: the precompiled linear superoperator
    plus the bilinear exchange feedback."""

    def __init__(self, params: SimParams):
        self.params = params
        self.system = AtomSystem(params.atom, params.b_z)
        basis = self.system.basis_g
        dg = self.system.dim_g
        self.f_max = float(max(f for f, _ in basis.states))
        self.fz = self.system.ops_g["F"].z.matrix
        self.s_ops = self.system.ops_g["S"]
        self.qj = params.coll.q_slowdown * params.j_exchange

        self.couplings: list[FieldCoupling] = [
            couple_field(f, self.system, params.coll, params.doppler)
            for f in params.fields()
        ]
        self.channel = (OpticalChannel(self.system, self.couplings, params.coll,
                                       light_shift=params.light_shift)
                        if self.couplings else None)

        eye_sop = np.eye(dg * dg)
        h_g = self.system.h_g
        lin = -1j * (np.kron(h_g, np.eye(dg)) - np.kron(np.eye(dg), h_g.T))
        vec_id = np.eye(dg).reshape(-1)
        lin -= params.gamma * (eye_sop - np.outer(vec_id / dg, vec_id))
        if self.qj > 0:
            phi_sop = 0.25 * eye_sop
            for s in self.s_ops.matrices:
                phi_sop = phi_sop + np.kron(s, s.T)
            lin += self.qj * (phi_sop - eye_sop)
        if self.channel is not None:
            lin = lin + self.channel.ground_superop
        self.lin_superop = lin

        self.sub = Subspace(params.projection_mode, basis)
        n = self.sub.n
        self.r_lin = np.empty((n, n))
        self.m_rows = np.empty((3, n))
        self.q_mats = [np.empty((n, n)) for _ in range(3)]
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            rho_k = self.sub.to_matrix(e)
            lin_k = (lin @ rho_k.reshape(-1)).reshape(dg, dg)
            self.r_lin[:, k] = self.sub.from_matrix(lin_k)
            for j, s in enumerate(self.s_ops.matrices):
                self.m_rows[j, k] = np.trace(rho_k @ s).real
            for j, bracket in enumerate(_exchange_vector_bracket(rho_k, self.s_ops)):
                self.q_mats[j][:, k] = self.sub.from_matrix(bracket)
        self._active_j = [j for j in range(3)
                          if np.abs(self.m_rows[j]).max() > 1e-14
                          and np.abs(self.q_mats[j]).max() > 1e-14]
        self.fz_row = np.array([
            np.trace(self.sub.to_matrix(np.eye(n)[k]) @ self.fz).real / self.f_max
            for k in range(n)
        ])
        self._tr_row = np.zeros(n)
        self._tr_row[:dg] = 1.0

    def rhs_coords(self, s: np.ndarray) -> np.ndarray:
        out = self.r_lin @ s
        if self.qj > 0:
            for j in self._active_j:
                mj = self.m_rows[j] @ s
                if mj != 0.0:
                    out += (self.qj * mj) * (self.q_mats[j] @ s)
        return out

    def rhs_matrix(self, rho_g: np.ndarray) -> np.ndarray:
        """Reference full-matrix evaluation (same channels, no projection)."""
        rho = np.asarray(rho_g, dtype=complex)
        out = (self.lin_superop @ rho.reshape(-1)).reshape(rho.shape)
        if self.qj > 0:
            m = np.array([np.trace(rho @ s).real for s in self.s_ops.matrices])
            for mj, bracket in zip(m, _exchange_vector_bracket(rho, self.s_ops)):
                if mj != 0.0:
                    out = out + (self.qj * mj) * bracket
        return out

    def magnetization(self, s: np.ndarray) -> float:
        return float(self.fz_row @ s)

    def unpolarized_coords(self) -> np.ndarray:
        return self.sub.from_matrix(np.eye(self.sub.dim) / self.sub.dim)

    def seed_coords(self, eps: float) -> np.ndarray:
        """Fully mixed state displaced along z so that M_z(0) = eps."""
        rho = np.eye(self.sub.dim) / self.sub.dim
        if eps != 0.0:
            fz2 = float(np.trace(self.fz @ self.fz).real)
            rho = rho + eps * self.f_max / fz2 * self.fz.real
        return self.sub.from_matrix(rho)

    def symmetric_fixed_point(self) -> np.ndarray:
        """The magnetization-free stationary state (coords).

        On the even sector the mean-spin feedback vanishes, so the fixed
        point solves the linear system R_lin s = 0 at unit trace."""
        u = self.unpolarized_coords()
        a = self.r_lin + np.outer(u, self._tr_row)
        s_star = np.linalg.solve(a, u)
        if abs(self._tr_row @ s_star - 1.0) > 1e-8:
            raise IntegrationError("symmetric fixed point solve lost the trace")
        return s_star

    def slow_mode_rate(self) -> float:
        """Largest growth rate of fluctuations about the symmetric state.

        Positive values mark the ordered phase; the boundary is the zero
        crossing.  Uses the exact linearization, including the mean-spin
        feedback of the exchange term."""
        s_star = self.symmetric_fixed_point()
        rho_star = self.sub.to_matrix(s_star)
        lin = self.r_lin.copy()
        if self.qj > 0:
            for j in self._active_j:
                br = _exchange_vector_bracket(rho_star, self.s_ops)[j]
                lin += self.qj * np.outer(self.sub.from_matrix(br), self.m_rows[j])
        ev = np.linalg.eigvals(lin).real
        ev.sort()
        ev = ev[np.abs(ev) > 1e-7 * max(self.params.gamma, 1.0)]
        return float(ev[-1])


def ground_rhs(rho_g: np.ndarray, model: CompiledModel) -> np.ndarray:
    """Full ground-level time derivative for a given state (reference path)."""
    return model.rhs_matrix(rho_g)


# --- Dormand-Prince 4(5) embedded pair --------------------------------------

_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_ERR = _DP_B5 - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                             -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class IntegrationControls:
    rtol: float = 1e-8
    atol: float = 1e-10
    trace_tol: float = 1e-9
    positivity_tol: float = 1e-9
    max_step: float | None = None
    max_steps: int = 50_000_000
    steady_rel: float = 1e-6          # window-averaged dM/dt vs Gamma*|M|
    steady_state_rel: float = 1e-5    # window-averaged state displacement rate
    steady_abs_rate: float | None = None   # default: 1e-9 * gamma
    steady_window: float | None = None     # default: 5 / gamma


def _integrate_coords(model: CompiledModel, s0: np.ndarray, t_end: float,
                      controls: IntegrationControls,
                      stop_when_steady: bool = False):
    """Adaptive embedded RK on subspace coordinates.

    Returns (times, magnetizations, s_final, steady_flag).  Steadiness
    compares the state against trailing-window-old snapshots: both the
    window-averaged magnetization derivative and the window-averaged state
    displacement rate must fall below threshold.  Averaging over the window
    keeps the criterion meaningful for stiff parameter points, where the
    instantaneous derivative floats on integrator noise."""
    gamma = model.params.gamma
    window = controls.steady_window if controls.steady_window is not None else 5.0 / gamma
    abs_rate = (controls.steady_abs_rate if controls.steady_abs_rate is not None
                else 1e-9 * gamma)
    rhs = model.rhs_coords
    dim = model.sub.dim
    state_scale = 1.0 / dim
    t = 0.0
    s = s0.copy()
    k1 = rhs(s)
    h = min(0.1 / gamma, t_end)
    times = [0.0]
    mags = [model.magnetization(s)]
    snapshots = [(0.0, s0.copy(), mags[0])]
    steady = False
    n_steps = 0
    ks = np.empty((7, len(s)))
    while t < t_end * (1.0 - 1e-12):
        if n_steps >= controls.max_steps:
            raise IntegrationError("step budget exhausted",
                                   {"t": t, "steps": n_steps})
        h = min(h, t_end - t)
        if controls.max_step is not None:
            h = min(h, controls.max_step)
        if h < 1e-16 * max(abs(t), 1.0):
            raise IntegrationError("step size underflow", {"t": t, "h": h})
        ks[0] = k1
        for i in range(1, 7):
            ks[i] = rhs(s + h * (_DP_A[i] @ ks[:i]))
        s5 = s + h * (_DP_B5 @ ks)
        err_vec = h * (_DP_ERR @ ks)
        scale = controls.atol + controls.rtol * np.maximum(np.abs(s), np.abs(s5))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t += h
            s = s5
            k1 = ks[6].copy()  # FSAL
            n_steps += 1
            trace = float(np.sum(s[:dim]))
            if abs(trace - 1.0) > controls.trace_tol:
                raise IntegrationError("trace drift beyond tolerance",
                                       {"t": t, "trace": trace})
            if model.sub.min_eigenvalue(s) < -controls.positivity_tol:
                raise IntegrationError("state lost positivity",
                                       {"t": t, "min_eig": model.sub.min_eigenvalue(s)})
            m = model.magnetization(s)
            times.append(t)
            mags.append(m)
            if stop_when_steady:
                if t - snapshots[-1][0] >= window / 8.0:
                    snapshots.append((t, s.copy(), m))
                while len(snapshots) >= 2 and snapshots[1][0] <= t - window:
                    snapshots.pop(0)
                t_old, s_old, m_old = snapshots[0]
                if t_old <= t - window:
                    span = t - t_old
                    mdot = abs(m - m_old) / span
                    m_ok = mdot <= (controls.steady_rel * gamma
                                    * max(abs(m), abs(m_old)) + abs_rate)
                    sdot = math.sqrt(float(np.mean((s - s_old) ** 2))) / span
                    s_ok = sdot <= controls.steady_state_rel * gamma * state_scale
                    if m_ok and s_ok:
                        steady = True
                        break
        factor = 0.9 * err ** -0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return np.array(times), np.array(mags), s, steady


def integrate(params: SimParams, t_end: float, rho0: np.ndarray | None = None,
              controls: IntegrationControls | None = None,
              model: CompiledModel | None = None,
              stop_when_steady: bool = False) -> Trajectory:
    """Integrate the projected dynamics from ``rho0`` (default: seeded
    unpolarized state) for ``t_end`` seconds."""
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    model = model if model is not None else CompiledModel(params)
    controls = controls or IntegrationControls()
    if rho0 is None:
        s0 = model.seed_coords(params.seed_polarization)
    else:
        s0 = model.sub.from_matrix(np.asarray(rho0, dtype=complex))
    times, mags, s, steady = _integrate_coords(model, s0, t_end, controls,
                                               stop_when_steady=stop_when_steady)
    return Trajectory(times=times, magnetization=mags,
                      final_state=model.sub.to_matrix(s), steady=steady)


@dataclass
class SteadyResult:
    m_ss: float
    rho_ss: np.ndarray
    t_converge: float
    converged: bool
    trajectory: Trajectory


def steady_state(params: SimParams, seed: float | None = None,
                 max_time: float | None = None,
                 controls: IntegrationControls | None = None,
                 model: CompiledModel | None = None) -> SteadyResult:
    """Integrate from the seeded unpolarized state until both the
    magnetization derivative and the state derivative stay below threshold
    over a trailing window."""
    model = model if model is not None else CompiledModel(params)
    eps = params.seed_polarization if seed is None else seed
    if max_time is None:
        max_time = 2000.0 / params.gamma
    controls = controls or IntegrationControls()
    s0 = model.seed_coords(eps)
    times, mags, s, steady = _integrate_coords(model, s0, max_time, controls,
                                               stop_when_steady=True)
    traj = Trajectory(times=times, magnetization=mags,
                      final_state=model.sub.to_matrix(s), steady=steady)
    return SteadyResult(m_ss=float(mags[-1]), rho_ss=traj.final_state,
                        t_converge=float(times[-1]), converged=steady,
                        trajectory=traj)


@dataclass
class ResponseResult:
    tau: float
    m_ss: float
    floored: bool
    converged: bool
    eps: float


def response_time(params: SimParams, seed: float | None = None,
                  floor_reference: float = 1.0,
                  floor_fraction: float = 1e-3,
                  max_time: float | None = None,
                  controls: IntegrationControls | None = None,
                  model: CompiledModel | None = None) -> ResponseResult:
    """Time for |M| to reach 63% of its steady value.

    Points whose steady response is below ``floor_fraction`` of
    ``floor_reference`` report the dark lifetime T1 instead."""
    eps = params.seed_polarization if seed is None else seed
    res = steady_state(params, seed=eps, max_time=max_time,
                       controls=controls, model=model)
    if not res.converged:
        raise IntegrationError("no steady state within the time budget",
                               {"t_max": res.t_converge, "m_last": res.m_ss})
    if abs(res.m_ss) < floor_fraction * floor_reference:
        return ResponseResult(tau=params.t1, m_ss=res.m_ss, floored=True,
                              converged=True, eps=eps)
    tau = res.trajectory.response_crossing(0.63)
    if tau is None:
        raise IntegrationError("response never crossed 63% of steady value", {})
    return ResponseResult(tau=tau, m_ss=res.m_ss, floored=False,
                          converged=True, eps=eps)


def seed_sensitivity(params: SimParams, factors: tuple[float, ...] = (1.0, 0.1),
                     model: CompiledModel | None = None, **kwargs) -> dict:
    """Response time at scaled symmetry-breaking seeds.

    Near criticality tau grows logarithmically as the seed shrinks; the
    report carries d tau / d ln(eps) so it can be published next to tau."""
    model = model if model is not None else CompiledModel(params)
    eps0 = params.seed_polarization
    taus = {}
    for f in factors:
        r = response_time(params, seed=eps0 * f, model=model, **kwargs)
        taus[f] = r.tau
    out = {"eps_base": eps0, "tau_by_factor": taus}
    fs = sorted(taus)
    if len(fs) >= 2 and fs[0] != fs[-1]:
        out["dtau_dlog_eps"] = ((taus[fs[-1]] - taus[fs[0]])
                                / math.log(fs[-1] / fs[0]))
    return out


def critical_pump_rate(j_over_gamma: float, gamma: float = GAMMA_BASE,
                       lo: float = 0.05, hi: float = 40.0,
                       tol: float = 1e-3, **kwargs) -> float:
    """Critical axis rate I/Gamma on a fixed-J contour, from the zero
    crossing of the symmetric state's slow-mode growth rate."""
    def rate(i):
        p = SimParams.from_rates(i_over_gamma=i, j_over_gamma=j_over_gamma,
                                 gamma=gamma, seed_polarization=0.0, **kwargs)
        return CompiledModel(p).slow_mode_rate()
    if rate(hi) < 0:
        raise ValueError(f"no instability up to I/Gamma = {hi} at J/Gamma = {j_over_gamma}")
    while hi / lo > 1.0 + tol:
        mid = math.sqrt(lo * hi)
        if rate(mid) > 0:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def critical_exchange_rate(i_over_gamma: float, gamma: float = GAMMA_BASE,
                           lo: float = 0.05, hi: float = 40.0,
                           tol: float = 1e-3, **kwargs) -> float:
    """Critical axis rate J/Gamma on a fixed-I contour."""
    def rate(j):
        p = SimParams.from_rates(i_over_gamma=i_over_gamma, j_over_gamma=j,
                                 gamma=gamma, seed_polarization=0.0, **kwargs)
        return CompiledModel(p).slow_mode_rate()
    if rate(hi) < 0:
        raise ValueError(f"no instability up to J/Gamma = {hi} at I/Gamma = {i_over_gamma}")
    while hi / lo > 1.0 + tol:
        mid = math.sqrt(lo * hi)
        if rate(mid) > 0:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


# --- rate calibrations -------------------------------------------------------

_CAL_CACHE: dict = {}


def _cal_key(params: SimParams, shape: OpticalField, extra=()) -> tuple:
    a = params.atom
    c = params.coll
    d = params.doppler
    return (float(a.nuclear_spin), a.a_ground, a.a_excited, a.g_ground, a.g_excited,
            c.gamma_c, c.gamma_q, c.gamma_p, c.q_slowdown,
            d.width, d.quadrature_order, params.b_z, params.light_shift,
            str(shape.polarization), shape.detuning, shape.restrict_to_reference,
            tuple(map(float, shape.reference_transition))) + tuple(extra)


def absorption_rate_unit(params: SimParams, shape: OpticalField | None = None) -> float:
    """Photon absorption rate of the fully mixed state per unit intensity."""
    shape = shape if shape is not None else pump_field(1.0)
    key = ("abs",) + _cal_key(params, shape)
    if key not in _CAL_CACHE:
        system = AtomSystem(params.atom, params.b_z)
        coupling = couple_field(shape.scaled(1.0), system, params.coll, params.doppler)
        channel = OpticalChannel(system, [coupling], params.coll,
                                 light_shift=params.light_shift)
        rho0 = np.eye(system.dim_g) / system.dim_g
        _CAL_CACHE[key] = channel.absorption_rate(rho0)
    return _CAL_CACHE[key]


def alignment_rate_unit(params: SimParams, shape: OpticalField | None = None) -> float:
    """Axis rate I per unit intensity of the alignment pump.

    One axis unit corresponds to PUMP_AXIS_SCALE photon absorptions per
    second per unpolarized atom (see module docstring)."""
    return absorption_rate_unit(params, shape) / PUMP_AXIS_SCALE


def bias_rate_unit(params: SimParams, shape: OpticalField) -> float:
    """Bias rate H per unit intensity, fixed by the disordered-limit pumping
    law: the linearized steady response at I=0 must satisfy dM/dH = 1/Gamma,
    so H := Gamma * dM/d(intensity)."""
    key = ("H",) + _cal_key(params, shape, extra=(params.gamma, params.j_exchange))
    if key not in _CAL_CACHE:
        system = AtomSystem(params.atom, params.b_z)
        dg = system.dim_g
        coupling = couple_field(shape.scaled(1.0), system, params.coll, params.doppler)
        channel = OpticalChannel(system, [coupling], params.coll,
                                 light_shift=params.light_shift)
        eye_sop = np.eye(dg * dg)
        h_g = system.h_g
        lin = -1j * (np.kron(h_g, np.eye(dg)) - np.kron(np.eye(dg), h_g.T))
        vec_id = np.eye(dg).reshape(-1)
        lin -= params.gamma * (eye_sop - np.outer(vec_id / dg, vec_id))
        qj = params.coll.q_slowdown * params.j_exchange
        if qj > 0:
            phi_sop = 0.25 * eye_sop
            s_mats = system.ops_g["S"].matrices
            for s in s_mats:
                phi_sop = phi_sop + np.kron(s, s.T)
            lin += qj * (phi_sop - eye_sop)
            # linearized mean-spin feedback at the fully mixed state
            for s in s_mats:
                lin += (qj / 4.0) * np.outer(s.reshape(-1), s.T.reshape(-1))
        rho0 = np.eye(dg) / dg
        source = channel.apply(rho0).reshape(-1)
        solver = lin + np.outer(vec_id / dg, vec_id)
        delta = np.linalg.solve(solver, -source).reshape(dg, dg)
        fz = system.ops_g["F"].z.matrix
        f_max = float(max(f for f, _ in system.basis_g.states))
        m1 = float(np.trace(delta @ fz).real) / f_max
        unit = params.gamma * abs(m1)
        if unit == 0:
            raise RuntimeError("bias calibration produced a vanishing rate")
        _CAL_CACHE[key] = unit
    return _CAL_CACHE[key]
