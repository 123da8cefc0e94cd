# Licensed under a 3-clause BSD style license - see LICENSE.rst
# -*- coding: utf-8 -*-
"""
=======
profgpr
=======
Gaussian-process regression of 1-D tokamak profiles (L-mode, H-mode, H-mode with
ITB) using a change-point kernel and heavy-tailed likelihoods, plus a synthetic
benchmark harness comparing fitting methods by RMSE against known truth.
"""

from __future__ import absolute_import
from ._version import __version__
import os

src_path = os.path.realpath(__path__[0])
base_path = os.sep.join(src_path.split(os.sep)[:-2])


def default_config_path():
    """Path of the reference run configuration shipped with the package

    Returns
    -------
    conf_path : str
        Path to ``etc/default.ini``
    """
    return os.path.join(base_path, 'etc', 'default.ini')
