#!/usr/bin/env python
# coding=utf-8
# Filename: exceptions.py
"""
Exceptions raised by transmonkit.

Every class derives from both ``TransmonkitError`` and the builtin that
matches the failure (``ValueError`` for bad input, ``RuntimeError`` for
numerical trouble), so plain ``except ValueError`` keeps working.

"""


class TransmonkitError(Exception):
    """ Base class of all transmonkit errors. """


class ParameterError(TransmonkitError, ValueError):
    """ A parameter is outside of its domain, e.g. a non-positive E_C. """


class GeometryError(TransmonkitError, ValueError):
    """ Regions of a cross-section overlap, leave gaps or are degenerate. """


class ConfigError(TransmonkitError, ValueError):
    """
    Invalid value in a run config.

    Attributes
    ----------
    field : str
        Dotted path of the offending config entry, e.g. ``fem.mesh.target_h``.

    """
    def __init__(self, field, message):
        self.field = field
        super(ConfigError, self).__init__('{}: {}'.format(field, message))


class SolverSetupError(TransmonkitError, ValueError):
    """ The Laplace problem can not be set up (missing materials, no pads). """


class MeshResolutionError(TransmonkitError, ValueError):
    """ The mesh is too coarse to resolve a requested layer. """


class NumericalError(TransmonkitError, RuntimeError):
    """
    A numerical routine failed.

    Attributes
    ----------
    diagnostics : dict
        Whatever the failing routine knew about the failure.

    """
    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super(NumericalError, self).__init__(message)


class SolverError(NumericalError):
    """
    The iterative solver stagnated.

    Attributes
    ----------
    residual_history : list
        Relative residual after every iteration.

    """
    def __init__(self, message, residual_history, diagnostics=None):
        self.residual_history = list(residual_history)
        super(SolverError, self).__init__(message, diagnostics)


class MeshingError(TransmonkitError, RuntimeError):
    """
    The mesher could not reach the requested quality.

    Attributes
    ----------
    statistics : dict
        Node/triangle counts, minimum angle and area range of the last attempt.

    """
    def __init__(self, message, statistics=None):
        self.statistics = dict(statistics or {})
        super(MeshingError, self).__init__('{} (mesh statistics: {})'.format(message, self.statistics))


class PassError(TransmonkitError, RuntimeError):
    """
    A pass of an adaptive run failed.

    Attributes
    ----------
    pass_index : int
        1-based index of the failing pass.
    cause : Exception
        The original error.
    completed : list
        Records of the passes before the failing one.

    """
    def __init__(self, pass_index, cause, completed=None):
        self.pass_index = pass_index
        self.cause = cause
        self.completed = list(completed or [])
        super(PassError, self).__init__('Pass {} failed: {}: {}'.format(pass_index, type(cause).__name__, cause))


class TransmonkitWarning(UserWarning):
    """ Flagged, non-fatal condition (low cutoff, airbox too small, ...). """
