"""
Configuration file for nox.

Runs the test suite for every supported Python version.
"""

from nox_poetry import session


PYTHON_VERSIONS = ["3.8", "3.9", "3.10", "3.11"]


def run_tests(local_session) -> None:
    """Install the package with its test dependencies and run the tests."""
    local_session.install(".", "pytest", "pytest-xdist", "hypothesis")
    local_session.run("pytest", "-n", "auto", *local_session.posargs)


@session(python=PYTHON_VERSIONS, reuse_venv=True)  # noqa: F841
def tests(session):  # pylint: disable=redefined-outer-name
    """Run the nox matrix build test cases."""
    run_tests(session)
