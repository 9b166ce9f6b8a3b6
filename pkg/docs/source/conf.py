# Sphinx configuration for the streamsig API reference.
import os
import sys

sys.path.insert(0, os.path.abspath('../../src'))

from streamsig.version import __version__  # noqa: E402

project = 'streamsig'
copyright = '2026, streamsig contributors'
author = 'streamsig contributors'

version = '.'.join(__version__.split('.')[:2])
release = __version__

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
]

# runtime dependencies are mocked so the reference builds from a bare docs env
autodoc_mock_imports = ['networkx', 'numpy', 'ruamel', 'sympy']
autodoc_member_order = 'bysource'

master_doc = 'index'
source_suffix = '.rst'
exclude_patterns = []

html_theme = 'alabaster'
htmlhelp_basename = 'streamsigdoc'

man_pages = [
    (master_doc, 'streamsig', 'streamsig API reference', [author], 1),
]
