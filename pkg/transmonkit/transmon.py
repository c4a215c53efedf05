#!/usr/bin/env python
# coding=utf-8
# Filename: transmon.py

"""
The transmon Hamiltonian in the truncated charge basis and the spectral
quantities derived from it.

All energies are frequencies E/h in GHz. The charge basis is
n = -N, ..., N, in which the Hamiltonian is real symmetric tridiagonal:
4 E_C (n - n_g)^2 on the diagonal and -E_J / 2 on both first off-diagonals.

"""

import math
import warnings
from dataclasses import dataclass, field, replace
import numpy as np
import scipy.linalg
from scipy import constants

from transmonkit.exceptions import ParameterError, NumericalError, TransmonkitWarning

#: Relative eigen-residual bound, ||H v - E v|| <= RESIDUAL_TOL * max(|E|, 1).
RESIDUAL_TOL = 1e-9
#: Eigenvalues closer than this (relative to the spectral scale) count as degenerate.
DEGENERACY_TOL = 1e-9
#: Detunings below 1 MHz are treated as resonant.
NEAR_RESONANCE_GHZ = 1e-3
#: Number of levels shown in band plots and accepted by charge_dispersion.
N_BAND_LEVELS = 5


def recommended_cutoff(ej, ec):
    """ Smallest charge cutoff N = ceil(5 + sqrt(E_J/E_C)) that keeps truncation errors negligible. """
    _check_energies(ej, ec)
    return int(math.ceil(5 + math.sqrt(ej / ec)))


def default_cutoff(ej, ec):
    """ The recommended cutoff, but never below 10. """
    return max(10, recommended_cutoff(ej, ec))


def _check_energies(ej, ec):
    if not np.isfinite(ej) or ej < 0:
        raise ParameterError('E_J must be a finite number >= 0, got {}'.format(ej))
    if not np.isfinite(ec) or ec <= 0:
        raise ParameterError('E_C must be a finite number > 0, got {}'.format(ec))


def _check_index(value, upper, name):
    if int(value) != value or not 0 <= value < upper:
        raise ParameterError('{} must be an integer in [0, {}), got {}'.format(name, upper, value))
    return int(value)


@dataclass(frozen=True)
class TransmonParams:
    """
    Inputs of the transmon Hamiltonian.

    Attributes
    ----------
    ej : float
        Josephson energy E_J/h in GHz, >= 0.
    ec : float
        Charging energy E_C/h in GHz, > 0.
    ng : float
        Dimensionless offset charge.
    cutoff : int
        Charge cutoff N, the basis is n = -N..N. If None, ``default_cutoff``
        is used. Values below ``recommended_cutoff`` are accepted with a warning.

    """
    ej: float
    ec: float
    ng: float = 0.0
    cutoff: int = None

    def __post_init__(self):
        _check_energies(self.ej, self.ec)
        if not np.isfinite(self.ng):
            raise ParameterError('n_g must be finite, got {}'.format(self.ng))
        cutoff = default_cutoff(self.ej, self.ec) if self.cutoff is None else self.cutoff
        if int(cutoff) != cutoff or cutoff < 1:
            raise ParameterError('The charge cutoff must be an integer >= 1, got {}'.format(cutoff))
        object.__setattr__(self, 'ej', float(self.ej))
        object.__setattr__(self, 'ec', float(self.ec))
        object.__setattr__(self, 'ng', float(self.ng))
        object.__setattr__(self, 'cutoff', int(cutoff))

        bound = recommended_cutoff(self.ej, self.ec)
        if self.cutoff < bound:
            warnings.warn('Charge cutoff N={} is below the recommended N >= {} for E_J/E_C = {:.4g}'
                          .format(self.cutoff, bound, self.ej / self.ec), TransmonkitWarning)

    @property
    def dimension(self):
        return 2 * self.cutoff + 1

    @property
    def charges(self):
        """ The charge states n = -N..N as floats. """
        return np.arange(-self.cutoff, self.cutoff + 1, dtype=np.float64)

    def with_ng(self, ng):
        return replace(self, ng=ng)


@dataclass(frozen=True, eq=False)
class ChargeBasisMatrix:
    """ Real symmetric tridiagonal Hamiltonian in the charge basis. """
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    params: TransmonParams

    @property
    def dimension(self):
        return self.diagonal.size

    def toarray(self):
        """ Dense copy, only meant for small matrices and tests. """
        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)

    def trace(self):
        return float(np.sum(self.diagonal))

    def matvec(self, vectors):
        """ H @ vectors for vectors of shape (dim,) or (dim, k), using the band structure. """
        vectors = np.asarray(vectors)
        diag = self.diagonal if vectors.ndim == 1 else self.diagonal[:, None]
        off = self.off_diagonal if vectors.ndim == 1 else self.off_diagonal[:, None]
        result = diag * vectors
        result[:-1] += off * vectors[1:]
        result[1:] += off * vectors[:-1]
        return result


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Lowest eigenpairs of one diagonalization.

    Attributes
    ----------
    energies : ndarray(ndim=1)
        Ascending eigenenergies in GHz.
    vectors : ndarray(ndim=2)
        Orthonormal eigenvectors in the charge basis, one per column.
        Within a degenerate pair the vector with the lower dominant charge
        index comes first, and each vector's dominant component is positive.
    params : TransmonParams
        The parameters of the diagonalized Hamiltonian.

    """
    energies: np.ndarray
    vectors: np.ndarray
    params: TransmonParams

    @property
    def levels(self):
        return self.energies.size

    def transition(self, i, j):
        """ E_j - E_i in GHz. """
        return float(self.energies[j] - self.energies[i])

    def residuals(self):
        """ ||H v - E v|| for each retained pair. """
        h = build_hamiltonian(self.params)
        return np.linalg.norm(h.matvec(self.vectors) - self.vectors * self.energies, axis=0)


@dataclass(frozen=True, eq=False)
class NormalizedBands:
    """
    Band structure over the offset charge, normalized to E_01 at n_g = 0.5.

    Attributes
    ----------
    ng_grid : ndarray(ndim=1)
        Uniform offset-charge samples on [0, 1].
    bands : ndarray(ndim=2)
        bands[m, k] = (E_m(ng_k) - min E_0) / E_01(0.5).
    ej_over_ec, ec, cutoff, e01_half :
        Ratio, charging energy (GHz), cutoff used and the normalization
        denominator E_01(0.5) in GHz.

    """
    ng_grid: np.ndarray
    bands: np.ndarray
    ej_over_ec: float
    ec: float
    cutoff: int
    e01_half: float

    @property
    def levels(self):
        return self.bands.shape[0]

    def peak_to_peak(self, level):
        return float(np.ptp(self.bands[level]))


@dataclass(frozen=True, eq=False)
class CouplingCurve:
    """
    Qubit-resonator coupling over a sweep of E_C at fixed E_J.

    All arrays are ordered by ascending E_J/E_C. Points within 1 MHz of a
    resonance (Delta = 0 or Delta + alpha = 0) are flagged; their chi is NaN.

    Attributes
    ----------
    ej : float
        The fixed Josephson energy in GHz.
    ec, ratio, fq, alpha, detuning : ndarray
        Charging energy, E_J/E_C, exact E_01 at n_g = 0.5, anharmonicity and
        qubit-resonator detuning, all energies in GHz.
    g_bare : ndarray
        Bare coupling g0 |<0|n|1>| in GHz.
    chi : ndarray
        Dispersive shift g^2 alpha / (Delta (Delta + alpha)) in GHz.
    flagged : ndarray of bool
        Near-resonant points.
    notes : list of str
        Reason per point, empty if not flagged.

    """
    ej: float
    ec: np.ndarray
    ratio: np.ndarray
    fq: np.ndarray
    alpha: np.ndarray
    detuning: np.ndarray
    g_bare: np.ndarray
    chi: np.ndarray
    flagged: np.ndarray
    notes: list = field(default_factory=list)

    def pairs(self, kind='chi'):
        """ List of (E_J/E_C, value) tuples of the 'chi' or 'g_bare' series, flagged points skipped for chi. """
        values = {'chi': self.chi, 'g_bare': self.g_bare}[kind]
        keep = ~self.flagged if kind == 'chi' else np.ones_like(self.flagged)
        return [(float(r), float(v)) for r, v, k in zip(self.ratio, values, keep) if k]


def build_hamiltonian(params):
    """
    Build the charge-basis Hamiltonian.

    Parameters
    ----------
    params : TransmonParams
        E_J, E_C, n_g and the cutoff N.

    Returns
    -------
    h : ChargeBasisMatrix
        Diagonal 4 E_C (n - n_g)^2 for n = -N..N and constant
        off-diagonal -E_J/2, in GHz.

    """
    if not isinstance(params, TransmonParams):
        raise ParameterError('build_hamiltonian needs TransmonParams, got {}'.format(type(params).__name__))
    diagonal = 4.0 * params.ec * (params.charges - params.ng) ** 2
    off_diagonal = np.full(params.dimension - 1, -params.ej / 2.0)
    return ChargeBasisMatrix(diagonal=diagonal, off_diagonal=off_diagonal, params=params)


def _canonical_order(energies, vectors):
    """ Orders degenerate pairs by dominant charge index and fixes the sign of every vector. """
    dominant = np.argmax(np.abs(vectors), axis=0)
    scale = max(1.0, float(np.max(np.abs(energies))))
    group = np.concatenate([[0], np.cumsum(np.diff(energies) > DEGENERACY_TOL * scale)])
    order = np.lexsort((dominant, group))
    energies, vectors, dominant = energies[order], vectors[:, order], dominant[order]

    signs = np.sign(vectors[dominant, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return energies, vectors * signs


def diagonalize(h, levels):
    """
    Lowest eigenpairs of a charge-basis Hamiltonian.

    Uses the symmetric tridiagonal LAPACK drivers, only the requested index
    range is computed.

    Parameters
    ----------
    h : ChargeBasisMatrix
        The Hamiltonian.
    levels : int
        Number M of eigenpairs, 1 <= M <= dimension.

    Returns
    -------
    spectrum : Spectrum
        Ascending energies and the eigenvectors in the charge basis.

    Raises
    ------
    ParameterError
        If M is out of range.
    NumericalError
        If LAPACK fails or an eigenpair violates the residual bound.

    """
    if int(levels) != levels or not 1 <= levels <= h.dimension:
        raise ParameterError('Number of levels must be in [1, {}], got {}'.format(h.dimension, levels))
    levels = int(levels)

    try:
        energies, vectors = scipy.linalg.eigh_tridiagonal(
            h.diagonal, h.off_diagonal, select='i', select_range=(0, levels - 1), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise NumericalError('Tridiagonal eigensolver failed: {}'.format(err),
                             {'dimension': h.dimension, 'levels': levels, 'lapack': str(err)})

    energies, vectors = _canonical_order(energies, vectors)
    spectrum = Spectrum(energies=energies, vectors=vectors, params=h.params)

    residuals = np.linalg.norm(h.matvec(vectors) - vectors * energies, axis=0)
    bounds = RESIDUAL_TOL * np.maximum(np.abs(energies), 1.0)
    if np.any(residuals > bounds):
        raise NumericalError('Eigenpairs violate the residual bound',
                             {'dimension': h.dimension, 'levels': levels,
                              'residuals': residuals.tolist(), 'bounds': bounds.tolist()})
    return spectrum


def eigenenergies(ej, ec, ng=0.0, levels=N_BAND_LEVELS, cutoff=None):
    """ The lowest energies in GHz for one set of parameters. """
    params = TransmonParams(ej=ej, ec=ec, ng=ng, cutoff=cutoff)
    return diagonalize(build_hamiltonian(params), levels).energies


def normalized_bands(ej_over_ec, ec, ng_samples, levels=N_BAND_LEVELS, cutoff=None):
    """
    Energy bands over the offset charge, normalized to the 0-1 transition.

    Parameters
    ----------
    ej_over_ec : float
        Ratio E_J/E_C, > 0.
    ec : float
        Charging energy in GHz.
    ng_samples : int
        Number of uniform n_g samples on [0, 1], >= 3.
    levels : int
        Number of bands.
    cutoff : int or None
        Charge cutoff, None for the default.

    Returns
    -------
    bands : NormalizedBands
        (E_m(n_g) - min E_0) / E_01(n_g = 0.5) for every level m.

    """
    if not np.isfinite(ej_over_ec) or ej_over_ec <= 0:
        raise ParameterError('E_J/E_C must be > 0, got {}'.format(ej_over_ec))
    if int(ng_samples) != ng_samples or ng_samples < 3:
        raise ParameterError('ng_samples must be an integer >= 3, got {}'.format(ng_samples))
    ej = ej_over_ec * ec
    params = TransmonParams(ej=ej, ec=ec, cutoff=cutoff)

    ng_grid = np.linspace(0.0, 1.0, int(ng_samples))
    energies = np.array([eigenenergies(ej, ec, ng, levels, params.cutoff) for ng in ng_grid]).T
    e_half = eigenenergies(ej, ec, 0.5, max(levels, 2), params.cutoff)
    e01_half = float(e_half[1] - e_half[0])
    if not e01_half > 0:
        raise NumericalError('E_01 at n_g = 0.5 is not positive, can not normalize',
                             {'ej': ej, 'ec': ec, 'e01_half': e01_half})

    bands = (energies - energies[0].min()) / e01_half
    return NormalizedBands(ng_grid=ng_grid, bands=bands, ej_over_ec=float(ej_over_ec), ec=float(ec),
                           cutoff=params.cutoff, e01_half=e01_half)


def charge_dispersion(ej, ec, level_pair=(0, 1), cutoff=None):
    """
    Peak-to-peak charge dispersion of a transition.

    Parameters
    ----------
    ej, ec : float
        Energies in GHz.
    level_pair : tuple(int, int)
        Levels (i, j) with i <= j <= 4. For i == j the dispersion of the single
        level i is returned.
    cutoff : int or None
        Charge cutoff, None for the default.

    Returns
    -------
    dispersion : float
        abs(E_ij(n_g = 0.5) - E_ij(n_g = 0)) in GHz, E_ij = E_j - E_i.

    """
    i, j = level_pair
    if not (int(i) == i and int(j) == j and 0 <= i <= j < N_BAND_LEVELS):
        raise ParameterError('Level pair must satisfy 0 <= i <= j <= {}, got {}'.format(
            N_BAND_LEVELS - 1, level_pair))
    i, j = int(i), int(j)
    e_zero = eigenenergies(ej, ec, 0.0, j + 1, cutoff)
    e_half = eigenenergies(ej, ec, 0.5, j + 1, cutoff)
    if i == j:
        return float(abs(e_half[i] - e_zero[i]))
    return float(abs((e_half[j] - e_half[i]) - (e_zero[j] - e_zero[i])))


def anharmonicity(ej, ec, cutoff=None):
    """ alpha = E_12 - E_01 at n_g = 0.5, in GHz. Warns for E_J/E_C < 1. """
    _check_energies(ej, ec)
    if ej / ec < 1:
        warnings.warn('Anharmonicity requested outside of the transmon regime, E_J/E_C = {:.4g}'
                      .format(ej / ec), TransmonkitWarning)
    energies = eigenenergies(ej, ec, 0.5, 3, cutoff)
    return float((energies[2] - energies[1]) - (energies[1] - energies[0]))


def transition_frequency(ej, ec, cutoff=None, ng=0.5):
    """ Exact E_01 in GHz from diagonalization. """
    energies = eigenenergies(ej, ec, ng, 2, cutoff)
    return float(energies[1] - energies[0])


def qubit_frequency(ej, ec):
    """ Closed-form transmon frequency sqrt(8 E_J E_C) - E_C in GHz. """
    if not (np.isfinite(ej) and np.isfinite(ec) and ej > 0 and ec > 0):
        raise ParameterError('qubit_frequency needs E_J > 0 and E_C > 0, got {}, {}'.format(ej, ec))
    return math.sqrt(8.0 * ej * ec) - ec


def charge_matrix_element(spec, i, j):
    """
    abs(<i| n |j>) with n = diag(-N..N).

    Parameters
    ----------
    spec : Spectrum
    i, j : int
        Level indices below spec.levels.

    """
    i = _check_index(i, spec.levels, 'Level index i')
    j = _check_index(j, spec.levels, 'Level index j')
    charges = spec.params.charges
    return float(abs(np.dot(spec.vectors[:, i], charges * spec.vectors[:, j])))


def charge_matrix(spec):
    """ Table of abs(<i| n |j>) over all retained levels. """
    charges = spec.params.charges
    return np.abs(spec.vectors.T @ (charges[:, None] * spec.vectors))


def coupling_curve(ej_fixed, ec_values, resonator_freq, g0, cutoff=None):
    """
    Bare and dispersive qubit-resonator coupling over a sweep of E_C.

    Parameters
    ----------
    ej_fixed : float
        Josephson energy in GHz, held constant.
    ec_values : sequence of float
        Charging energies in GHz, all > 0. The result is sorted by
        ascending E_J/E_C regardless of their order.
    resonator_freq : float
        Resonator frequency in GHz, > 0.
    g0 : float
        Coupling scale in GHz, >= 0. The bare coupling is g0 |<0|n|1>|.
    cutoff : int or None
        Charge cutoff for every point, None for the per-point default.

    Returns
    -------
    curve : CouplingCurve

    """
    if not np.isfinite(ej_fixed) or ej_fixed <= 0:
        raise ParameterError('The fixed E_J must be > 0, got {}'.format(ej_fixed))
    if not np.isfinite(resonator_freq) or resonator_freq <= 0:
        raise ParameterError('The resonator frequency must be > 0, got {}'.format(resonator_freq))
    if not np.isfinite(g0) or g0 < 0:
        raise ParameterError('g0 must be >= 0, got {}'.format(g0))
    ec_values = np.atleast_1d(np.asarray(ec_values, dtype=np.float64))
    if ec_values.size == 0 or np.any(~np.isfinite(ec_values)) or np.any(ec_values <= 0):
        raise ParameterError('All E_C values must be > 0, got {}'.format(ec_values.tolist()))
    ec_values = np.sort(ec_values)[::-1]

    n_points = ec_values.size
    fq, alpha, g_bare = np.empty(n_points), np.empty(n_points), np.empty(n_points)
    for k, ec in enumerate(ec_values):
        params = TransmonParams(ej=ej_fixed, ec=ec, ng=0.5, cutoff=cutoff)
        spectrum = diagonalize(build_hamiltonian(params), 3)
        fq[k] = spectrum.transition(0, 1)
        alpha[k] = spectrum.transition(1, 2) - fq[k]
        g_bare[k] = g0 * charge_matrix_element(spectrum, 0, 1)

    detuning = fq - resonator_freq
    flagged = (np.abs(detuning) < NEAR_RESONANCE_GHZ) | (np.abs(detuning + alpha) < NEAR_RESONANCE_GHZ)
    notes = []
    for k in range(n_points):
        if abs(detuning[k]) < NEAR_RESONANCE_GHZ:
            notes.append('near resonance: |f_q - f_r| = {:.3g} MHz'.format(abs(detuning[k]) * 1e3))
        elif flagged[k]:
            notes.append('near resonance: |f_12 - f_r| = {:.3g} MHz'.format(abs(detuning[k] + alpha[k]) * 1e3))
        else:
            notes.append('')

    chi = np.full(n_points, np.nan)
    ok = ~flagged
    chi[ok] = g_bare[ok] ** 2 * alpha[ok] / (detuning[ok] * (detuning[ok] + alpha[ok]))
    if np.any(flagged):
        warnings.warn('{} of {} coupling points are near resonance and have no dispersive shift'
                      .format(int(flagged.sum()), n_points), TransmonkitWarning)

    return CouplingCurve(ej=float(ej_fixed), ec=ec_values, ratio=ej_fixed / ec_values, fq=fq, alpha=alpha,
                         detuning=detuning, g_bare=g_bare, chi=chi, flagged=flagged, notes=notes)


def wavefunction(spec, level, phi_grid):
    """
    Phase-basis wavefunction of one level.

    Parameters
    ----------
    spec : Spectrum
    level : int
        Level index below spec.levels.
    phi_grid : array_like
        Phase samples, normally covering [-pi, pi].

    Returns
    -------
    phi : ndarray(ndim=1)
        The phase samples.
    psi : ndarray(ndim=1), complex
        sum_n c_n exp(i n phi) / sqrt(2 pi).

    """
    level = _check_index(level, spec.levels, 'Level')
    phi = np.asarray(phi_grid, dtype=np.float64).ravel()
    basis = np.exp(1j * np.outer(phi, spec.params.charges)) / math.sqrt(2 * np.pi)
    return phi, basis @ spec.vectors[:, level]


def ec_from_capacitance(c_total):
    """
    Charging energy E_C = e^2 / (2 C) as a frequency in GHz.

    Parameters
    ----------
    c_total : float
        Total capacitance in farad, > 0.

    """
    if not np.isfinite(c_total) or c_total <= 0:
        raise ParameterError('The capacitance must be > 0, got {}'.format(c_total))
    return constants.e ** 2 / (2.0 * c_total * constants.h) / 1e9


def capacitance_from_ec(ec):
    """ Inverse of ec_from_capacitance, ec in GHz, result in farad. """
    if not np.isfinite(ec) or ec <= 0:
        raise ParameterError('E_C must be > 0, got {}'.format(ec))
    return constants.e ** 2 / (2.0 * ec * 1e9 * constants.h)
