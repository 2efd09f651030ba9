"""Transfer-matrix transport for bidirectional waveguides.

Amplitudes are flux normalised: the left-moving coefficients carry a factor
``sqrt(v_L/v_R)`` relative to the raw field amplitudes, so that ``T + R = 1``
for lossless atoms whatever the two group velocities are.

Per atom, with ``D = omega - omega_j + i gamma_j``, ``S = Gamma_R + Gamma_L``,
``d = Gamma_R - Gamma_L``, ``g = sqrt(Gamma_R Gamma_L)`` and the free
propagation phase ``phi_j = (q_R + q_L)(x_j - x_{j-1})/2``::

    T_j = 1/(D + i d) * [[(D - iS) e^{i phi},  -2ig e^{-i phi}],
                         [ 2ig e^{i phi},      (D + iS) e^{-i phi}]]

maps ``(t~_{j-1}, r~_j)`` to ``(t~_j, r~_{j+1})``. Its determinant is
``(D - i d)/(D + i d)``: unimodular for ``gamma = 0``, equal to one for
symmetric coupling. Products are accumulated with the scalar ``1/(D + i d)``
pulled out, which keeps the on-resonance symmetric atom (where that scalar
blows up) well defined.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import WAVELENGTH, Atom, AtomChain, ConfigError, WaveguideConfig, require_valid

_M22_FLOOR = 1e-30
_RCOND_FLOOR = 1e-15


class SingularTransferError(ArithmeticError):
    """The per-atom transfer matrix does not exist (perfect reflector)."""


class SingularSystemError(ArithmeticError):
    def __init__(self, message: str, condition: float = math.inf):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class TransferMatrix2:
    m11: complex
    m12: complex
    m21: complex
    m22: complex

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    def __matmul__(self, other: "TransferMatrix2") -> "TransferMatrix2":
        return TransferMatrix2(*(self.as_array() @ other.as_array()).ravel())


@dataclass(frozen=True)
class ScatteringResult:
    t_amp: complex
    r_amp: complex
    transmission: float
    reflection: float
    t_sites: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), repr=False)
    r_sites: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), repr=False)


def _require_bidirectional(wg: WaveguideConfig):
    if wg.is_chiral:
        raise ConfigError("bidirectional transport needs a bidirectional waveguide config")


def _phase_rate(omega, wg):
    """``(q_R + q_L)/2`` per internal length unit (lengths in wavelengths)."""
    q_r, q_l = wg.wavenumbers(omega)
    return 0.5 * (q_r + q_l) * WAVELENGTH


def _detuning(omega, omega_atom, gamma, gr, gl):
    """``D = omega - omega_j + i gamma_j``; a fully decoupled atom only propagates,
    so its ``D`` is replaced by 1 to keep every ratio defined on resonance."""
    D = omega - omega_atom + 1j * gamma
    return np.where((np.asarray(gr) == 0) & (np.asarray(gl) == 0), 1.0 + 0j, D)


def _cleared_entries(D, gr, gl, phase):
    s = gr + gl
    g = np.sqrt(gr * gl)
    e = np.exp(1j * phase)
    ei = np.conj(e) if np.isrealobj(phase) else np.exp(-1j * phase)
    return (D - 1j * s) * e, -2j * g * ei, 2j * g * e, (D + 1j * s) * ei


def cleared_transfer_matrix(atom: Atom, prev_x: float, omega: float,
                            wg: WaveguideConfig) -> tuple[TransferMatrix2, complex]:
    """``(C, c)`` with the atom's transfer matrix equal to ``C / c``.

    ``C`` has entries of order the coupling rates even where ``c = D + i d``
    vanishes, so it is the well-scaled object for products and eigenvalues.
    """
    _require_bidirectional(wg)
    if prev_x > atom.x:
        raise ConfigError(f"prev_x={prev_x} lies to the right of the atom at x={atom.x}")
    D = complex(_detuning(omega, atom.omega, atom.gamma, atom.gamma_r, atom.gamma_l))
    c = D + 1j * (atom.gamma_r - atom.gamma_l)
    phase = _phase_rate(omega, wg) * (atom.x - prev_x)
    entries = _cleared_entries(D, atom.gamma_r, atom.gamma_l, phase)
    return TransferMatrix2(*(complex(m) for m in entries)), complex(c)


def transfer_matrix(atom: Atom, prev_x: float, omega: float, wg: WaveguideConfig) -> TransferMatrix2:
    """Transfer matrix of one atom including the free propagation from ``prev_x``."""
    cleared, c = cleared_transfer_matrix(atom, prev_x, omega, wg)
    if c == 0:
        raise SingularTransferError(
            f"atom at x={atom.x} reflects perfectly at omega={omega}; no transfer matrix")
    return TransferMatrix2(cleared.m11 / c, cleared.m12 / c, cleared.m21 / c, cleared.m22 / c)


@dataclass(frozen=True)
class BatchScattering:
    """Net amplitudes for a batch of chains/frequencies (arrays over the batch)."""

    t_amp: np.ndarray
    r_amp: np.ndarray
    log_t: np.ndarray

    @property
    def transmission(self) -> np.ndarray:
        return np.exp(self.log_t)

    @property
    def reflection(self) -> np.ndarray:
        return np.abs(self.r_amp) ** 2


def propagate_batch(x, omega_atoms, gamma, gamma_r, gamma_l, omega, wg: WaveguideConfig) -> BatchScattering:
    """Scatter a photon off many chains at once.

    Atom parameters are arrays of shape ``(..., N)`` (broadcastable against
    each other) with positions sorted along the last axis; ``omega`` has the
    batch shape ``(...)``. The running product is renormalised at every site
    and its log-scale tracked separately, so deep stop bands do not
    underflow.
    """
    _require_bidirectional(wg)
    omega = np.asarray(omega, dtype=float)
    x, omega_atoms, gamma, gamma_r, gamma_l = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (x, omega_atoms, gamma, gamma_r, gamma_l)))
    n = x.shape[-1]
    if n < 1:
        raise ConfigError("chain needs at least one atom")
    batch = np.broadcast_shapes(x.shape[:-1], omega.shape)
    k = _phase_rate(omega, wg)

    p11 = np.ones(batch, complex)
    p12 = np.zeros(batch, complex)
    p21 = np.zeros(batch, complex)
    p22 = np.ones(batch, complex)
    log_scale = np.zeros(batch)
    log_det = np.zeros(batch)   # sum ln|D - i d|^2
    arg_det = np.zeros(batch)   # sum arg(D - i d)
    blocked = np.zeros(batch, bool)
    prev = x[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(n):
            xj = x[..., j]
            gr, gl = gamma_r[..., j], gamma_l[..., j]
            D = _detuning(omega, omega_atoms[..., j], gamma[..., j], gr, gl)
            a11, a12, a21, a22 = _cleared_entries(D, gr, gl, k * (xj - prev))
            prev = xj
            q11, q12, q21, q22 = (a11 * p11 + a12 * p21, a11 * p12 + a12 * p22,
                                  a21 * p11 + a22 * p21, a21 * p12 + a22 * p22)
            big = np.maximum(np.maximum(np.abs(q11), np.abs(q12)),
                             np.maximum(np.abs(q21), np.abs(q22)))
            big = np.where(big > 0, big, 1.0)
            # behind an atom that blocks left-incident light nothing arrives: keep the product
            p11, p12, p21, p22 = (np.where(blocked, p, q / big)
                                  for p, q in ((p11, q11), (p12, q12), (p21, q21), (p22, q22)))
            log_scale = np.where(blocked, log_scale, log_scale + np.log(big))
            num = D - 1j * (gr - gl)
            log_det = np.where(blocked, log_det, log_det + np.log(np.abs(num) ** 2))
            arg_det = np.where(blocked, arg_det, arg_det + np.angle(num))
            blocked = blocked | (num == 0)

        abs22 = np.abs(p22)
        if np.any(abs22 < _M22_FLOOR):
            raise SingularSystemError("net transfer matrix has vanishing M22", math.inf)
        log_t = log_det - 2.0 * (np.log(abs22) + log_scale)
        log_t = np.minimum(log_t, 0.0)
        # t~_N = prod(D - i d) / M22 ; restore the raw phase convention with x_0 = x_1
        phase_t = arg_det - np.angle(p22) + k * (x[..., 0] - x[..., -1])
        t_amp = np.exp(0.5 * log_t + 1j * phase_t)
        r_amp = -(p21 / p22) * np.exp(2j * k * x[..., 0])
    return BatchScattering(t_amp=t_amp, r_amp=r_amp, log_t=log_t)


def _chain_arrays(chain: AtomChain):
    return tuple(chain.column(c) for c in ("x", "omega", "gamma", "gamma_r", "gamma_l"))


def scattering_sweep(chain: AtomChain, omegas, wg: WaveguideConfig) -> BatchScattering:
    """Transport of one chain on a frequency grid, vectorised over frequency."""
    require_valid(chain)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    cols = [c[np.newaxis, :] for c in _chain_arrays(chain)]
    return propagate_batch(*cols, omegas, wg)


def chain_scattering(chain: AtomChain, omega: float, wg: WaveguideConfig) -> ScatteringResult:
    """Net and per-site amplitudes of a chain with the photon injected from the left.

    Per-site amplitudes come from a recursion started at the right end;
    when some atom is opaque from the right the recursion is undefined and the
    sample is handed to :func:`solve_amplitudes_dense`. Atoms behind the first
    one that blocks left-incident light entirely receive no field, so the
    chain is cut there (this also removes the bound states that make the
    full linear system singular between two resonant mirrors).
    """
    require_valid(chain)
    _require_bidirectional(wg)
    x, w, g, gr, gl = _chain_arrays(chain)
    D = _detuning(omega, w, g, gr, gl)
    blocked = np.flatnonzero(D - 1j * (gr - gl) == 0)
    if blocked.size:
        k = int(blocked[0]) + 1
        if k == chain.n:
            return solve_amplitudes_dense(chain, omega, wg)
        head = chain_scattering(AtomChain(chain.atoms[:k]), omega, wg)
        pad = np.zeros(chain.n - k, complex)
        return ScatteringResult(t_amp=0j, r_amp=head.r_amp, transmission=0.0,
                                reflection=head.reflection,
                                t_sites=np.concatenate([head.t_sites, pad]),
                                r_sites=np.concatenate([head.r_sites, pad]))
    c = D + 1j * (gr - gl)
    if np.any(c == 0):
        return solve_amplitudes_dense(chain, omega, wg)
    try:
        net = propagate_batch(x, w, g, gr, gl, omega, wg)
    except SingularSystemError:
        return solve_amplitudes_dense(chain, omega, wg)
    t_amp, r_amp = complex(net.t_amp), complex(net.r_amp)
    t_sites, r_sites = _sites(x, D, gr, gl, omega, wg, t_amp, r_amp)
    return ScatteringResult(t_amp=t_amp, r_amp=r_amp,
                            transmission=float(net.transmission),
                            reflection=float(net.reflection),
                            t_sites=t_sites, r_sites=r_sites)


def _sites(x, D, gr, gl, omega, wg, t_amp, r_amp):
    """Per-site amplitudes by recursion from the right end, where ``r_{N+1} = 0``.

    Running against the direction of decay keeps the recursion stable inside
    stop bands and lossy stretches.
    """
    n = len(x)
    k = _phase_rate(omega, wg)
    xs = np.concatenate([[x[0]], x])  # x_0 = x_1
    t_til = t_amp * np.exp(1j * k * x[-1])
    r_til = 0j
    t_sites = np.empty(n, complex)
    r_sites = np.empty(n, complex)
    t_sites[-1] = t_amp
    for j in range(n, 0, -1):
        a11, a12, a21, a22 = _cleared_entries(D[j - 1], gr[j - 1], gl[j - 1], k * (xs[j] - xs[j - 1]))
        # inverse of the cleared matrix over its determinant c (D - i d)
        num = D[j - 1] - 1j * (gr[j - 1] - gl[j - 1])
        t_til, r_til = (a22 * t_til - a12 * r_til) / num, (a11 * r_til - a21 * t_til) / num
        if j > 1:
            t_sites[j - 2] = t_til * np.exp(-1j * k * xs[j - 1])
        r_sites[j - 1] = r_til * np.exp(1j * k * xs[j - 1])
    r_sites[0] = r_amp
    return t_sites, r_sites


def solve_amplitudes_dense(chain: AtomChain, omega: float, wg: WaveguideConfig) -> ScatteringResult:
    """Independent route: assemble every scattering condition into one linear system.

    Unknowns are the raw coefficients ``t_1..t_N``, ``r_1..r_N`` of
    ``phi_R = t_j e^{i q_R x}`` and ``phi_L = r_j e^{-i q_L x}`` together with
    the atomic amplitudes ``a_j`` (kept so that a resonant lossless atom
    stays regular), with ``t_0 = 1`` and ``r_{N+1} = 0``. At each atom::

        -i v_R [phi_R]_jump + V_R a_j = 0
         i v_L [phi_L]_jump + V_L a_j = 0
        V_R <phi_R> + V_L <phi_L> = (omega - omega_j + i gamma_j) a_j

    where ``<.>`` is the mean of the one-sided limits. Solved by LU with
    partial pivoting.
    """
    if chain.n < 1:
        raise ConfigError("chain needs at least one atom")
    require_valid(chain)
    _require_bidirectional(wg)
    n = chain.n
    v_r, v_l = wg.v_r, wg.v_l
    q_r, q_l = wg.wavenumbers(omega)
    x, w, g, gr, gl = _chain_arrays(chain)
    xp = WAVELENGTH * x
    V_r = np.sqrt(2.0 * v_r * gr)
    V_l = np.sqrt(2.0 * v_l * gl)

    A = np.zeros((3 * n, 3 * n), complex)
    b = np.zeros(3 * n, complex)

    def put(row, kind, k, coeff):
        if kind == "t":
            if k == 0:
                b[row] -= coeff
            else:
                A[row, k - 1] += coeff
        elif kind == "r":
            if k <= n:
                A[row, n + k - 1] += coeff
        else:
            A[row, 2 * n + k - 1] += coeff

    for j in range(1, n + 1):
        D = complex(_detuning(omega, w[j - 1], g[j - 1], gr[j - 1], gl[j - 1]))
        eR = np.exp(1j * q_r * xp[j - 1])
        eL = np.exp(-1j * q_l * xp[j - 1])
        vr, vl = V_r[j - 1], V_l[j - 1]
        row = 3 * (j - 1)
        put(row, "t", j, -1j * v_r * eR)
        put(row, "t", j - 1, 1j * v_r * eR)
        put(row, "a", j, vr)
        put(row + 1, "r", j + 1, 1j * v_l * eL)
        put(row + 1, "r", j, -1j * v_l * eL)
        put(row + 1, "a", j, vl)
        put(row + 2, "t", j, 0.5 * vr * eR)
        put(row + 2, "t", j - 1, 0.5 * vr * eR)
        put(row + 2, "r", j + 1, 0.5 * vl * eL)
        put(row + 2, "r", j, 0.5 * vl * eL)
        put(row + 2, "a", j, -D)

    lu, piv = linalg.lu_factor(A, check_finite=False)
    anorm = np.linalg.norm(A, 1)
    rcond, info = linalg.lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond >= _RCOND_FLOOR:
        raise SingularSystemError("dense scattering system is numerically singular",
                                  1.0 / rcond if rcond > 0 else math.inf)
    sol = linalg.lu_solve((lu, piv), b, check_finite=False)
    t_sites = sol[:n]
    r_sites = sol[n:2 * n] * math.sqrt(v_l / v_r)
    return ScatteringResult(t_amp=complex(t_sites[-1]), r_amp=complex(r_sites[0]),
                            transmission=float(abs(t_sites[-1]) ** 2),
                            reflection=float(abs(r_sites[0]) ** 2),
                            t_sites=t_sites, r_sites=r_sites)
