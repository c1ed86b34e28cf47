# -*- coding: utf-8 -*-
"""
Slit square with drift b = (1, 0): Doob transform by the principal
eigenfunction and weighted volumes at the slit tip
"""

from heatprof.gallery import gallery
from heatprof.meshing import cached_triangulate
from heatprof.forms import CoefficientField, assemble
from heatprof.solver import principal_eigenpair
from heatprof.doob import make_profile, transform, weighted_volume

#Graded mesh of the slit square
spec, slit = gallery('slit-square', slit_length=0.5)
mesh = cached_triangulate(slit, 0.05, grade_points='auto')

#Form with a constant drift
form = assemble(mesh, CoefficientField(b=[1.0, 0.0]))
pair = principal_eigenpair(form)

#h-transform; summary holds the identity error and the Markov defect
profile = make_profile(pair, mesh)
weighted = transform(form, profile)
print(weighted.summary)

#phi^2-weighted volumes of balls at the tip over three dyadic radii
table = weighted_volume(profile, slit, mesh, slit.free_tips[0],
                        [0.025, 0.05, 0.1])
print(table.to_frame())
