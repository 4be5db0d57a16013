# Configuration file for the Sphinx documentation builder.
#
# For the full list of options see
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

sys.path.insert(0, os.path.abspath("../.."))

# -- Project information -----------------------------------------------------

project = "migraflow"
copyright = "2024, The migraflow Developers"


# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "numpydoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.todo",
    "sphinx.ext.coverage",
    "sphinx.ext.viewcode",
    "sphinx.ext.intersphinx",
]

numpydoc_show_class_members = False
autodoc_default_options = {
    "members": True,
    "special-members": "__init__",
    "undoc-members": True,
    "exclude-members": "__weakref__",
    "member-order": "bysource",
}

intersphinx_mapping = {
    "numpy": ("https://numpy.org/doc/stable/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
}

coverage_show_missing_items = True

templates_path = ["_templates"]
exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = "sphinx_book_theme"
html_title = "migraflow: inter-regional migration flows"
html_show_sourcelink = False

todo_include_todos = True

remove_from_toctrees = ["_autosummary/*"]
