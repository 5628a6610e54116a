"""Optical coupling of the ground manifold through the pressure-broadened
excited level.

The optical coherence between the levels follows the fields quasi-statically
because collisional dephasing (gamma_c) dominates every other optical scale.
Eliminating it gives, per field, a coherence-fraction operator

    w = < E^-1 (E0 . D) >_v,   E(X) = H_e X - X H_g + (k.v - Delta - i gamma_c) X,

velocity-averaged over the 1-D Maxwell-Boltzmann distribution of the Doppler
shift k.v by Gauss-Hermite quadrature.  The excited-level matrix then solves a
linear quasi-steady equation driven by i(X rho_g w^+ - w rho_g X^+), and the
ground level sees three channels: depletion, stimulated return, and quench
repopulation (2 gamma_q / 3) sum_i D_i^+ rho_e D_i.

Each field addresses the ground hyperfine manifold of its reference
transition only; the other manifold sits a full ground hyperfine splitting
away and is treated as uncoupled, which makes the stretched states of the
non-addressed manifold exactly dark.

All of this is linear in rho_g, so :class:`OpticalChannel` precompiles the
whole ground-level action into one superoperator for fast repeated use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import units
from .spin_algebra import (
    EXCITED,
    GROUND,
    AtomSpec,
    VectorOperator,
    angular_momentum_operators,
    build_basis,
    cesium,
    dipole_operator,
    hyperfine_hamiltonian,
    polarization_vector,
    spherical_components,
    zeeman_hamiltonian,
)

# Cs D1 kinematics for the default Doppler width.
CS_MASS_KG = 132.905 * 1.66053906660e-27
D1_WAVELENGTH_M = 894.6e-9
BOLTZMANN_J_PER_K = 1.380649e-23


class OpticsError(RuntimeError):
    """Raised when the optical linear algebra cannot be carried out."""


@dataclass(frozen=True)
class OpticalField:
    """One optical beam: intensity proxy, polarization, detuning.

    ``detuning`` is an angular frequency relative to ``reference_transition``
    (F_ground, F_excited); positive values are blue.  ``polarization`` is a
    named unit vector ('x', 'y', 'sigma+', 'sigma-') or an explicit complex
    3-vector of unit norm.

    With ``restrict_to_reference`` the beam couples only the ground manifold
    of its reference transition, making the other manifold exactly dark; the
    linear pump uses this (its stretched-state darkness drives the
    alignment), while the circular bias keeps the full far-detuned coupling
    so strong bias pumping can empty every non-stretched state.

    ``symmetrize_z`` removes the residual effective circularity a linearly
    polarized beam acquires from the Zeeman splitting of the optical
    denominators (the channel is averaged with its 180-degree-about-x
    rotation, the numerical analogue of actively zeroing the beam's circular
    component).  ``None`` resolves to True for linear and False for circular
    polarizations.
    """

    amplitude_sq: float
    polarization: str | tuple
    detuning: float
    reference_transition: tuple[Fraction, Fraction]
    restrict_to_reference: bool = True
    symmetrize_z: bool | None = None

    def wants_symmetrization(self) -> bool:
        if self.symmetrize_z is not None:
            return self.symmetrize_z
        return isinstance(self.polarization, str) and self.polarization in ("x", "y")

    def __post_init__(self):
        if self.amplitude_sq < 0:
            raise ValueError("amplitude_sq must be >= 0")
        fg, fe = self.reference_transition
        object.__setattr__(self, "reference_transition",
                           (Fraction(fg), Fraction(fe)))
        vec = self.polarization_vector()
        if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
            raise ValueError("polarization vector must have unit norm")

    def polarization_vector(self) -> np.ndarray:
        if isinstance(self.polarization, str):
            return polarization_vector(self.polarization)
        return np.asarray(self.polarization, dtype=complex)

    def scaled(self, amplitude_sq: float) -> "OpticalField":
        return replace(self, amplitude_sq=amplitude_sq)


def pump_field(amplitude_sq: float = 1.0, detuning: float | None = None) -> OpticalField:
    """x-linear alignment beam, blue-detuned 700 MHz from F_g=3 -> F_e=4."""
    if detuning is None:
        detuning = units.frequency("700 MHz")
    return OpticalField(amplitude_sq, "x", detuning, (Fraction(3), Fraction(4)))


def bias_field(amplitude_sq: float = 1.0, sign: int = +1,
               detuning: float | None = None) -> OpticalField:
    """Circular bias beam, blue-detuned 1.2 GHz from F_g=3 -> F_e=4."""
    if detuning is None:
        detuning = units.frequency("1.2 GHz")
    pol = "sigma+" if sign >= 0 else "sigma-"
    return OpticalField(amplitude_sq, pol, detuning, (Fraction(3), Fraction(4)),
                        restrict_to_reference=False)


@dataclass(frozen=True)
class CollisionParams:
    """Collisional rates (angular frequencies / rates in rad/s or 1/s)."""

    gamma_c: float       # optical dephasing
    gamma_q: float       # quenching of the excited level
    gamma_p: float       # excited-level electron-spin destruction
    q_slowdown: float    # nuclear slow-down factor of electron-spin rates
    sigma_ex_v: float    # spin-exchange rate coefficient, cm^3/s

    def __post_init__(self):
        for name in ("gamma_c", "gamma_q", "gamma_p", "sigma_ex_v"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.q_slowdown <= 1:
            raise ValueError("q_slowdown must exceed 1")


def cesium_collisions() -> CollisionParams:
    return CollisionParams(
        gamma_c=units.frequency("1.86 GHz"),
        gamma_q=units.frequency("265 MHz"),
        gamma_p=units.frequency("219 MHz"),
        q_slowdown=4.57,
        sigma_ex_v=7e-10,
    )


@dataclass(frozen=True)
class DopplerSpec:
    """1-D thermal average of the Doppler shift k.v.

    ``width`` is the 1/e half-width of k.v in rad/s; order-n Gauss-Hermite
    quadrature integrates the Maxwell-Boltzmann weight exactly for
    polynomials up to degree 2n-1.  width=0 (or order=1) reduces to the
    stationary-atom limit.
    """

    width: float
    quadrature_order: int = 40

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("width must be >= 0")
        if self.quadrature_order < 1:
            raise ValueError("quadrature_order must be >= 1")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        if self.width == 0.0:
            return np.array([0.0]), np.array([1.0])
        t, wts = np.polynomial.hermite.hermgauss(self.quadrature_order)
        return self.width * t, wts / math.sqrt(math.pi)


def doppler_width(temperature_c: float = 87.0, wavelength_m: float = D1_WAVELENGTH_M,
                  mass_kg: float = CS_MASS_KG) -> float:
    """1/e half-width of k.v for a thermal vapor, rad/s."""
    t_k = temperature_c + 273.15
    v = math.sqrt(2.0 * BOLTZMANN_J_PER_K * t_k / mass_kg)
    return 2.0 * math.pi / wavelength_m * v


def cesium_doppler(temperature_c: float = 87.0, order: int = 40) -> DopplerSpec:
    return DopplerSpec(width=doppler_width(temperature_c), quadrature_order=order)


def stationary() -> DopplerSpec:
    return DopplerSpec(width=0.0, quadrature_order=1)


class AtomSystem:
    """Bases, operators and Hamiltonians of one atom in a static field."""

    def __init__(self, spec: AtomSpec | None = None, b_z: float = 1.0):
        self.spec = spec if spec is not None else cesium()
        self.b_z = float(b_z)
        self.basis_g = build_basis(self.spec, GROUND)
        self.basis_e = build_basis(self.spec, EXCITED)
        self.ops_g = angular_momentum_operators(self.basis_g)
        self.ops_e = angular_momentum_operators(self.basis_e)
        self.dim_g = self.basis_g.dimension
        self.dim_e = self.basis_e.dimension
        self.h_g = (hyperfine_hamiltonian(self.spec, self.basis_g, GROUND).matrix
                    + zeeman_hamiltonian(self.spec, self.b_z, self.basis_g, GROUND).matrix)
        self.h_e = (hyperfine_hamiltonian(self.spec, self.basis_e, EXCITED).matrix
                    + zeeman_hamiltonian(self.spec, self.b_z, self.basis_e, EXCITED).matrix)
        self.dipole = dipole_operator(self.basis_g, self.basis_e)
        self.dipole_sph = spherical_components(self.dipole)
        self._eig_g = np.linalg.eigh(self.h_g)
        self._eig_e = np.linalg.eigh(self.h_e)

    def with_field(self, b_z: float) -> "AtomSystem":
        return AtomSystem(self.spec, b_z)

    def ground_projector(self, f) -> np.ndarray:
        p = np.zeros((self.dim_g, self.dim_g))
        sl = self.basis_g.block_slice(f)
        p[sl, sl] = np.eye(sl.stop - sl.start)
        return p.astype(complex)

    def ground_pi_rotation_x(self) -> np.ndarray:
        """Unitary of a 180-degree rotation about x on the ground level."""
        fx = self.ops_g["F"].x.matrix
        lam, v = np.linalg.eigh(fx)
        return v @ np.diag(np.exp(-1j * math.pi * lam)) @ v.conj().T

    def hyperfine_offset(self, f_g, f_e) -> float:
        """Hyperfine-level separation of a named transition (Zeeman ignored)."""
        hf_g = hyperfine_hamiltonian(self.spec, self.basis_g, GROUND).matrix
        hf_e = hyperfine_hamiltonian(self.spec, self.basis_e, EXCITED).matrix
        ig = self.basis_g.block_slice(f_g).start
        ie = self.basis_e.block_slice(f_e).start
        return float(hf_e[ie, ie].real - hf_g[ig, ig].real)


def field_coupling_matrix(field: OpticalField, system: AtomSystem) -> np.ndarray:
    """E0 (eps . D) restricted to the field's reference ground manifold."""
    eps = field.polarization_vector()
    x = math.sqrt(field.amplitude_sq) * system.dipole.dot(eps)
    if not field.restrict_to_reference:
        return x
    f_g, _ = field.reference_transition
    return x @ system.ground_projector(f_g)


def coherence_fraction(field: OpticalField, system: AtomSystem,
                       coll: CollisionParams, doppler: DopplerSpec) -> np.ndarray:
    """Velocity-averaged quasi-steady coherence operator w (excited x ground)."""
    x = field_coupling_matrix(field, system)
    f_g, f_e = field.reference_transition
    delta_tot = field.detuning + system.hyperfine_offset(f_g, f_e)
    lam_e, v_e = system._eig_e
    lam_g, v_g = system._eig_g
    x_eig = v_e.conj().T @ x @ v_g
    base = lam_e[:, None] - lam_g[None, :] - delta_tot - 1j * coll.gamma_c
    kvs, wts = doppler.nodes()
    acc = np.zeros_like(x_eig)
    for kv, wt in zip(kvs, wts):
        denom = base + kv
        if np.abs(denom).min() < 1e-6 * max(coll.gamma_c, 1.0) and coll.gamma_c == 0.0:
            raise OpticsError("resolvent is singular: gamma_c = 0 at exact resonance")
        acc += wt * (x_eig / denom)
    return v_e @ acc @ v_g.conj().T


@dataclass(frozen=True)
class FieldCoupling:
    """Precomputed per-field operators feeding the quasi-steady solve."""

    field: OpticalField
    x: np.ndarray
    w: np.ndarray


def couple_field(field: OpticalField, system: AtomSystem, coll: CollisionParams,
                 doppler: DopplerSpec) -> FieldCoupling:
    return FieldCoupling(
        field=field,
        x=field_coupling_matrix(field, system),
        w=coherence_fraction(field, system, coll, doppler),
    )


# --- superoperator helpers (row-major vec: vec(A X B) = kron(A, B.T) vec X) ---

def _sop_left(a: np.ndarray, dim: int) -> np.ndarray:
    return np.kron(a, np.eye(dim))


def _sop_right(b: np.ndarray, dim: int) -> np.ndarray:
    return np.kron(np.eye(dim), b.T)


def _sop_sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b.T)


def excited_superoperator(system: AtomSystem, couplings: list[FieldCoupling],
                          coll: CollisionParams) -> np.ndarray:
    """Generator of the excited-level matrix: commutator, quench, spin
    destruction, and the stimulated drains of every field."""
    de = system.dim_e
    eye = np.eye(de * de)
    h_e = system.h_e
    a = -1j * (_sop_left(h_e, de) - _sop_right(h_e, de))
    a -= coll.gamma_q * eye
    s_ops = system.ops_e["S"].matrices
    a -= coll.gamma_p * (0.75 * eye - sum(_sop_sandwich(s, s) for s in s_ops))
    for c in couplings:
        g_e = c.x @ c.w.conj().T
        a -= 1j * (_sop_left(g_e, de) - _sop_right(g_e.conj().T, de))
    return a


def excited_source(couplings: list[FieldCoupling]) -> np.ndarray:
    """Superoperator mapping vec(rho_g) to the excited-level feeding term
    i (X rho_g w^+ - w rho_g X^+), summed over fields."""
    if not couplings:
        raise ValueError("at least one field coupling is required")
    shape = couplings[0].x.shape
    src = np.zeros((shape[0] * shape[0], shape[1] * shape[1]), dtype=complex)
    for c in couplings:
        src += 1j * (_sop_sandwich(c.x, c.w.conj().T) - _sop_sandwich(c.w, c.x.conj().T))
    return src


def excited_quasi_steady(rho_g: np.ndarray, couplings: list[FieldCoupling],
                         system: AtomSystem, coll: CollisionParams) -> np.ndarray:
    """Solve the quasi-steady excited-level matrix for a given ground state."""
    a = excited_superoperator(system, couplings, coll)
    src = excited_source(couplings) @ np.asarray(rho_g, dtype=complex).reshape(-1)
    try:
        vec = np.linalg.solve(a, -src)
    except np.linalg.LinAlgError as exc:
        residual = float(np.linalg.norm(src))
        raise OpticsError(f"quasi-steady solve failed (|source| = {residual:.3e})") from exc
    rho_e = vec.reshape(system.dim_e, system.dim_e)
    return 0.5 * (rho_e + rho_e.conj().T)


def repopulation(rho_e: np.ndarray, dipole: VectorOperator,
                 coll: CollisionParams) -> np.ndarray:
    """Quench return to the ground level, (2 gamma_q / 3) sum_i D_i^+ rho_e D_i.

    Conserves atoms: Tr(out) = gamma_q Tr(rho_e)."""
    out = np.zeros((dipole.x.matrix.shape[1],) * 2, dtype=complex)
    for d in dipole.matrices:
        out += d.conj().T @ rho_e @ d
    return (2.0 * coll.gamma_q / 3.0) * out


class OpticalChannel:
    """Compiled linear action of a set of fields on the ground-level matrix.

    The full channel (depletion, stimulated return, quench repopulation
    through the quasi-steady excited solve) is linear in rho_g, so it is
    assembled once into ``ground_superop`` (dim_g^2 x dim_g^2) plus the map
    ``excited_map`` giving the quasi-steady excited matrix.  ``light_shift``
    adds the coherent (Hermitian) part of the depletion kernel, which is
    dropped by default so that only dissipative channels act on the ground
    level.
    """

    def __init__(self, system: AtomSystem, couplings: list[FieldCoupling],
                 coll: CollisionParams, light_shift: bool = False):
        self.system = system
        self.couplings = couplings
        self.coll = coll
        self.light_shift = light_shift
        dg, de = system.dim_g, system.dim_e

        repop = np.zeros((dg * dg, de * de), dtype=complex)
        for d in system.dipole.matrices:
            repop += _sop_sandwich(d.conj().T, d)
        repop *= 2.0 * coll.gamma_q / 3.0

        # Fields are assembled independently: each gets its own quasi-steady
        # solve (cross-field stimulated terms are smaller than the per-field
        # ones by the same pump-rate/gamma_q factor, i.e. negligible), which
        # keeps every per-field channel exactly atom-conserving and lets a
        # linearly polarized channel be parity-symmetrized on its own.
        u = system.ground_pi_rotation_x()
        conj_fwd = np.kron(u, u.conj())
        conj_bwd = np.kron(u.conj().T, u.T)

        self.excited_map = np.zeros((de * de, dg * dg), dtype=complex)
        g_total = np.zeros((dg * dg, dg * dg), dtype=complex)
        for c in couplings:
            a_e = excited_superoperator(system, [c], coll)
            src = excited_source([c])
            try:
                e_map = np.linalg.solve(a_e, -src)
            except np.linalg.LinAlgError as exc:
                raise OpticsError("quasi-steady excited solve is singular") from exc
            g = c.x.conj().T @ c.w
            herm = 0.5 * (g + g.conj().T)
            anti = (g - g.conj().T) / 2j
            g_sop = -(_sop_left(anti, dg) + _sop_right(anti, dg))
            if light_shift:
                g_sop += 1j * (_sop_left(herm, dg) - _sop_right(herm, dg))
            g_sop += 1j * (_sop_sandwich(c.w.conj().T, c.x)
                           - _sop_sandwich(c.x.conj().T, c.w)) @ e_map
            g_sop += repop @ e_map
            if c.field.wants_symmetrization():
                g_sop = 0.5 * (g_sop + conj_bwd @ g_sop @ conj_fwd)
            g_total += g_sop
            self.excited_map += e_map
        self.ground_superop = g_total

    def rho_e(self, rho_g: np.ndarray) -> np.ndarray:
        vec = self.excited_map @ np.asarray(rho_g, dtype=complex).reshape(-1)
        m = vec.reshape(self.system.dim_e, self.system.dim_e)
        return 0.5 * (m + m.conj().T)

    def apply(self, rho_g: np.ndarray) -> np.ndarray:
        vec = self.ground_superop @ np.asarray(rho_g, dtype=complex).reshape(-1)
        return vec.reshape(self.system.dim_g, self.system.dim_g)

    def absorption_rate(self, rho_g: np.ndarray) -> float:
        """Photon absorption rate: gamma_q times the excited population."""
        return float(self.coll.gamma_q * np.trace(self.rho_e(rho_g)).real)


def transition_probability_table(system: AtomSystem,
                                 pump: OpticalField) -> list[tuple[int, float, float]]:
    """Probabilities of m -> m +/- 1 absorption on the pump's reference
    transition, for each spin projection m >= 0 of the addressed ground
    manifold; rows are normalized squared sigma+/- dipole elements."""
    eps = pump.polarization_vector()
    if abs(eps[2]) > 1e-12:
        raise ValueError("transition table requires a transverse polarization")
    f_g, f_e = pump.reference_transition
    sph = system.dipole_sph
    rows = []
    for m in range(int(f_g) + 1):
        col = system.basis_g.index(f_g, m)
        up = dn = 0.0
        if abs(m + 1) <= f_e:
            up = abs(sph[+1][system.basis_e.index(f_e, m + 1), col]) ** 2
        if abs(m - 1) <= f_e:
            dn = abs(sph[-1][system.basis_e.index(f_e, m - 1), col]) ** 2
        total = up + dn
        rows.append((m, up / total, dn / total))
    return rows
