#!/usr/bin/env python
# Filename: __version__.py
# pylint: disable=C0103
"""
Version of transmonkit, from the git tags through setuptools_scm, or from the
version.txt written at install time.

"""
from os.path import dirname, realpath, join

version = 'unknown version'

try:
    from setuptools_scm import get_version
    version = get_version(root='..', relative_to=__file__)
except (ImportError, LookupError):
    try:
        with open(join(realpath(dirname(__file__)), "version.txt"), 'r') as fobj:
            version = fobj.read().strip()
    except IOError:
        pass
