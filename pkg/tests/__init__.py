"""
Test package.

Needs to be a package to auto-document test case docs.
"""
