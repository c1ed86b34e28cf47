# -*- coding: utf-8 -*-

####
#
# setuptools likes to see a name for the package,
# and the __version__ is read by the command line:
#
name = 'heatprof'
__version__ = '1.0.0'

# Pull every module in as heatprof.<x>:
from . import errors
from . import geometry
from . import meshing
from . import forms
from . import solver
from . import doob
from . import validator
from . import gallery
from . import reporting
from . import cli
