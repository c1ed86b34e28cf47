#!/usr/bin/env python
#
# Setuptools install script for heatprof
#

import sys
import os
import subprocess
import setuptools

#
# Don't probe the mesh generator unless we need to:
#
if not( len(sys.argv) >= 2 and ('--help' in sys.argv[1:] or sys.argv[1] in ('--help-commands', 'egg_info', '--version', 'clean')) ):
    #
    # Test for a working copy of the triangle bindings.  Note that we DO NOT
    # exit if the test does not succeed, we merely remind the user that the
    # compiled Triangle library is a requirement s/he will need to satisfy.
    #
    try:
        import triangle
        try:
            #
            # So triangle imports...can it mesh a square?  Run the test as a
            # forked process so a crash in the compiled code stays contained.
            #
            sp = subprocess.Popen(
                        args=(sys.executable, '-c',
                              'import triangle; triangle.triangulate({"vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]}, "pq30a0.1")'),
                        stdin=None,
                        stdout=subprocess.PIPE,
                        stderr=subprocess.PIPE,
                    )
            (sp_out, sp_err) = sp.communicate()
            if sp.returncode != 0:
                #
                # So triangle is present but meshing a square failed.
                #
                sys.stderr.write("""
**
** WARNING:  the installed triangle package could not mesh a unit square.
**           heatprof builds every mesh with it; reinstall it from a
**           wheel matching this interpreter (pip install triangle).
**

""")
        except Exception as E:
            sys.stderr.write('ERROR:  failed to execute triangle test: {:s}\n'.format(str(E)))
            sys.exit(1)
    except:
        sys.stderr.write("""
**
** WARNING:  this software requires the triangle package (Python bindings
**           of Shewchuk's Triangle).  It is listed as a dependency and
**           will normally be installed by pip; platforms without a wheel
**           need a C compiler to build it.
**

""")

setuptools_info = {
    'name': 'heatprof',
    'version': '1.0.0',
    'author': 'heatprof developers',
    'description': 'Dirichlet heat kernels, eigenfunction profiles and Doob transforms on polygonal domains',
    'zip_safe': True,
    'packages': setuptools.find_packages(exclude=['tests']),
    'python_requires': '>=3.8',
    'install_requires': [
        'numpy>=1.20',
        'scipy>=1.8',
        'tabulate>=0.8',
        'pandas>=1.3',
        'openpyxl>=3.0.0',
        'matplotlib>=3.4',
        'triangle>=20220202',
        'shapely>=2.0',
        'sympy>=1.9',
        ],
    'extras_require': {
        'tests': ['pytest>=7', 'hypothesis>=6'],
        },
    'entry_points': {
        'console_scripts': ['heatprof=heatprof.cli:main'],
        },
    'classifiers': [
        "Programming Language :: Python",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        ],
    }
if os.path.isfile('README.rst'):
    with open('README.rst', 'r') as fh:
        setuptools_info['long_description'] = fh.read()
        if sys.version_info[0] >= 3:
            #
            # Augment for Python 3 setuptools:
            #
            setuptools_info['long_description_content_type'] = 'text/x-rst'

setuptools.setup(**setuptools_info)
