#!/usr/bin/env python3
"""
Unit tests for Privex's Rosenblatt approximation library.

To run them, use pytest

.. code-block:: bash

    # With pytest
    pip3 install pytest pytest-cov coverage codecov
    pytest
    # Verbose mode
    pytest -v
    # Only the fast deterministic modules
    pytest tests/test_kernels.py tests/test_integrate.py

Monte Carlo tests use fixed seeds and desk-scale replicate counts. The long-running acceptance suites are run
through the command line instead (``rosenblatt verify law`` etc.).

"""
