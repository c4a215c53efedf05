# -*- coding: utf-8 -*-
#
# Sphinx configuration of the transmonkit documentation.

import os
import sys
from datetime import date
from pkg_resources import get_distribution

import transmonkit
sys.path.insert(0, os.path.abspath('..'))


project = "transmonkit {}".format(transmonkit.version)
copyright = u'{0}, the transmonkit developers'.format(date.today().year)
author = 'the transmonkit developers'
release = get_distribution('transmonkit').version
version = '.'.join(release.split('.')[:2])

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.autosummary',
    'autoapi.extension',
    'numpydoc',
]

autosummary_generate = True

autoapi_type = 'python'
autoapi_dirs = ['../transmonkit']
autoapi_options = ['members', 'undoc-members']
autoapi_ignore = ["*/tests/*", "*test_*.py"]

source_suffix = ['.rst']
master_doc = 'index'
exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'collapse_navigation': False,
}
html_title = "transmonkit {}".format(transmonkit.version)
html_static_path = ['_static']

todo_include_todos = True


def setup(app):
    app.add_css_file('style.css')
