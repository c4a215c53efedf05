#!/usr/bin/env python
# coding=utf-8
# Filename: plotting.py

"""
SVG figures of the transmonkit reports.

The SVG output carries no date and a fixed hash salt, so that re-running a
config gives identical files.
"""

import numpy as np
import matplotlib as mpl
mpl.use('Agg')
import matplotlib.pyplot as plt
from matplotlib.colors import LogNorm

from transmonkit.io import atomic_open

mpl.rcParams['svg.hashsalt'] = 'transmonkit'

FIELD_LABELS = {'e_norm': '|E| [V/m]', 'energy_density': 'energy density [J/m$^3$]'}


def save_figure(fig, path):
    """ Save a figure as svg and close it. """
    with atomic_open(path, 'wb') as fobj:
        fig.savefig(fobj, format='svg', metadata={'Date': None})
    plt.close(fig)


def plot_bands(bands, path):
    """
    Normalized bands over the offset charge.

    Parameters
    ----------
    bands : NormalizedBands
    path : str

    """
    fig, ax = plt.subplots(figsize=(5, 4))
    for m in range(bands.levels):
        ax.plot(bands.ng_grid, bands.bands[m], label='m = {}'.format(m))
    ax.set_xlabel('$n_g$')
    ax.set_ylabel('$E_m / E_{01}(n_g = 1/2)$')
    ax.set_xlim(0, 1)
    ax.set_title('$E_J/E_C$ = {:g}, $E_C$ = {:g} GHz'.format(bands.ej_over_ec, bands.ec))
    ax.legend(loc='upper right', fontsize='small')
    fig.tight_layout()
    save_figure(fig, path)


def plot_dispersion(result, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for series in result.series:
        ax.semilogy(series.x, series.y, marker='o', markersize=3, label=series.qubit)
    ax.set_xlabel('$E_J/E_C$')
    ax.set_ylabel('charge dispersion $\\epsilon_{01}$ [MHz]')
    ax.set_title('{}: charge dispersion'.format(result.chip))
    ax.legend(fontsize='small', ncol=2)
    fig.tight_layout()
    save_figure(fig, path)


def plot_anharmonicity(result, fit, path):
    """ Anharmonicity over E_C per qubit, the pooled line fit and alpha = -E_C. """
    fig, ax = plt.subplots(figsize=(5, 4))
    for series in result.series:
        ax.plot(series.x, series.y, marker='o', linestyle='', markersize=4, label=series.qubit)
    if result.series:
        x = np.concatenate([series.x for series in result.series])
        grid = np.linspace(x.min(), x.max(), 50)
        ax.plot(grid, fit['pooled_slope'] * grid + fit['pooled_intercept'], color='k',
                label='fit, slope {:.3f}'.format(fit['pooled_slope']))
        ax.plot(grid, -grid, color='grey', linestyle='--', label='$\\alpha = -E_C$')
    ax.set_xlabel('$E_C$ [GHz]')
    ax.set_ylabel('anharmonicity $\\alpha$ [GHz]')
    ax.set_title('{}: anharmonicity'.format(result.chip))
    ax.legend(fontsize='small', ncol=2)
    fig.tight_layout()
    save_figure(fig, path)


def plot_coupling(result, path):
    """ Bare coupling and dispersive shift per qubit, near-resonant points are gaps. """
    fig, (ax_bare, ax_chi) = plt.subplots(2, 1, sharex=True, figsize=(5, 6))
    for series in result.series:
        ax = ax_bare if series.y_name == 'g_bare_GHz' else ax_chi
        ax.plot(series.x, series.y * 1e3, marker='o', markersize=3, label=series.qubit)
    ax_bare.set_ylabel('bare coupling $g_{01}$ [MHz]')
    ax_chi.set_ylabel('dispersive shift $\\chi$ [MHz]')
    ax_chi.set_yscale('symlog', linthresh=1e-2)
    ax_chi.set_xlabel('$E_J/E_C$')
    ax_bare.set_title('{}: qubit-resonator coupling'.format(result.chip))
    ax_bare.legend(fontsize='small', ncol=2)
    fig.tight_layout()
    save_figure(fig, path)


def plot_field_map(raster, quantity, path, title=None):
    """
    Heatmap of a rastered field on a log color scale, absent points blank.

    Parameters
    ----------
    raster : FieldRaster
    quantity : str
        'e_norm' or 'energy_density'.

    """
    values = np.ma.masked_invalid(getattr(raster, quantity))
    positive = values.compressed()
    positive = positive[positive > 0]
    norm = LogNorm(vmin=positive.min(), vmax=positive.max()) if positive.size else None
    values = np.ma.masked_less_equal(values, 0) if norm is not None else values

    cmap = plt.get_cmap('viridis').copy()
    cmap.set_bad('white')
    fig, ax = plt.subplots(figsize=(7, 4))
    image = ax.imshow(values, origin='lower', cmap=cmap, norm=norm, aspect='auto', interpolation='nearest',
                      extent=(raster.x[0], raster.x[-1], raster.y[0], raster.y[-1]))
    fig.colorbar(image, ax=ax, label=FIELD_LABELS[quantity])
    ax.set_xlabel('x [$\\mu$m]')
    ax.set_ylabel('y [$\\mu$m]')
    if title:
        ax.set_title(title)
    fig.tight_layout()
    save_figure(fig, path)


def plot_convergence(reports, path):
    """ f_q over the passes, one line with gid 'fq-line-<label>' per successful qubit. """
    fig, ax = plt.subplots(figsize=(5, 4))
    for report in reports:
        if report.failed or not report.passes:
            continue
        ax.plot([record.pass_index for record in report.passes], [record.fq for record in report.passes],
                marker='o', label=report.label, gid='fq-line-{}'.format(report.label))
    ax.set_xlabel('pass')
    ax.set_ylabel('$f_q$ [GHz]')
    ax.xaxis.get_major_locator().set_params(integer=True)
    ax.set_title('Convergence of the qubit frequency')
    if ax.lines:
        ax.legend(fontsize='small')
    fig.tight_layout()
    save_figure(fig, path)
