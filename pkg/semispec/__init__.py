"""
semispec: local spectral laboratory for matrix C0 semigroups
"""
__version__ = "0.1.0"
