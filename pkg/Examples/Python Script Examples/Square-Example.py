# -*- coding: utf-8 -*-
"""
Unit square with the Laplacian: principal eigenpair, heat kernel and the
two-sided envelope fit
"""

import numpy as np
from heatprof.gallery import gallery
from heatprof.meshing import cached_triangulate
from heatprof.forms import CoefficientField, assemble
from heatprof.solver import principal_eigenpair, heat_kernel_table
from heatprof.validator import sample_pairs, fit_envelope_constants

#Build the domain and the mesh
spec, square = gallery('square')
mesh = cached_triangulate(square, 0.05)

#Assemble the Dirichlet form of the Laplacian
form = assemble(mesh, CoefficientField())

#Principal eigenpair, compare with 2 pi^2
pair = principal_eigenpair(form, verbose=True)
print('lambda = {:.6f}, 2 pi^2 = {:.6f}'.format(pair.lam, 2*np.pi**2))

#Heat kernel on a log time grid up to the squared inner diameter
times = np.geomspace(1e-3, square.diam_inner**2, 16)
table = heat_kernel_table(form, times)

#Fit the Gaussian envelope constants on 200 stratified pairs
pairs = sample_pairs(square, mesh, 200, seed=7)
fit = fit_envelope_constants(table, square, mesh, pair.phi, pairs,
                             c_up=0.2, c_low=0.3)
print(fit.to_dict())
