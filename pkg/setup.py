#!/usr/bin/env python
#
# Licensed under a 3-clause BSD style license - see LICENSE.rst
from __future__ import absolute_import, division, print_function
#
# Standard imports
#
from glob import glob
import os
import re
#
from setuptools import setup, find_packages
#
from python.profgpr import base_path

if not os.path.exists(os.path.join(base_path, 'log')):
    os.mkdir(os.path.join(base_path, 'log'))


def get_version():
    """Read __version__ from python/profgpr/_version.py without importing the package"""
    with open(os.path.join('python', 'profgpr', '_version.py')) as f:
        match = re.search(r"^__version__\s*=\s*['\"]([^'\"]+)['\"]", f.read(), re.M)
    if not match:
        raise RuntimeError("Unable to find __version__ in python/profgpr/_version.py")
    return match.group(1)


#
# Begin setup
#
setup_keywords = dict()
#
setup_keywords['name'] = 'profgpr'
setup_keywords['description'] = 'Gaussian-process fitting of tokamak profiles with change-point kernels'
setup_keywords['author'] = 'profgpr developers'
setup_keywords['license'] = 'BSD'
setup_keywords['version'] = get_version()
setup_keywords['entry_points'] = {'console_scripts': ['profgpr = profgpr.cli:main']}
#
# Use README.md as a long_description.
#
setup_keywords['long_description'] = ''
if os.path.exists('README.md'):
    with open('README.md') as readme:
        setup_keywords['long_description'] = readme.read()
#
# Set other keywords for the setup function.
#
setup_keywords['provides'] = [setup_keywords['name']]
setup_keywords['python_requires'] = '>=3.8'
setup_keywords['zip_safe'] = False
setup_keywords['packages'] = find_packages('python')
setup_keywords['package_dir'] = {'': 'python'}
setup_keywords['test_suite'] = 'profgpr.tests.profgpr_test_suite.profgpr_test_suite'

requires = []
optionals = {}
with open('requirements.txt', 'r') as f:
    for line in f.readlines():
        package = line.strip()
        if not package:
            continue
        # Check for extra requirement specifications
        extra_spec = re.search(r'\[(.*?)]', package)
        if not extra_spec:
            requires.append(package)
        else:
            extra_spec = extra_spec.group()
            # Removes '[]' characters, obtains all spec. keys and removes spaces in spec. keys
            spec_keys = [s.strip(' ') for s in re.sub(r'\[|]', '', extra_spec).split(',')]
            package = package.replace(extra_spec, '')
            for spec_key in spec_keys:
                optionals.setdefault(spec_key, []).append(package)

setup_keywords['install_requires'] = requires
setup_keywords['extras_require'] = optionals
#
# Internal data directories.
#
setup_keywords['data_files'] = [('profgpr/etc', glob('etc/*.ini'))]
#
# Run setup command.
#
setup(**setup_keywords)
