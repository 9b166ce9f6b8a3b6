# Store the version here so:
# 1) setup.py can read it without importing numpy or networkx
# 2) the run manifest can stamp it on every output

# uses semantic versioning, http://semver.org
__version__ = '0.1.0'
