# Sphinx configuration for the pyimplan module documentation.
# Options: https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

# autodoc imports pyimplan from the repository root
sys.path.insert(0, os.path.abspath('../../'))

# -- Project information -----------------------------------------------------

project = 'pyimplan'
copyright = '2024 pyimplan contributors'
author = 'pyimplan contributors'

release = '0.1.0'

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx_rtd_theme', 'sphinx.ext.autodoc', 'sphinx.ext.mathjax',
    'sphinx.ext.autosummary'
]
autosummary_generate = True
autodoc_member_order = 'bysource'
autodoc_default_options = {'members': True, 'undoc-members': False}

templates_path = ['_templates']
exclude_patterns = ['_build', '_templates']

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'

# ReadtheDocs still looks for master_doc
master_doc = 'index'
