"""
heatprof.errors

"""


class HeatprofError(Exception):
    '''Base class for every error raised by heatprof'''


class ParseError(HeatprofError):
    '''Malformed domain-spec or run-config document'''


class GeometryError(HeatprofError):
    '''Domain violates a polygon invariant or a point lies outside it'''


class MeshError(HeatprofError):
    '''Mesher could not meet the requested size or quality bound'''


class EmptyBall(HeatprofError):
    '''No mesh node lies inside the requested inner ball'''


class SearchFailure(HeatprofError):
    '''No representative point satisfies both distance constraints'''


class CertificationFailure(HeatprofError):
    '''No inner-uniform curve exists for a sampled pair at grid resolution'''


class AssemblyError(HeatprofError):
    '''Non-finite or non-elliptic coefficient values met during assembly'''


class ConvergenceFailure(HeatprofError):
    '''Iterative eigen-solver stopped before reaching its tolerance'''


class NonPositiveEigenvector(HeatprofError):
    '''Principal eigenvector changes sign on interior nodes'''


class SolverError(HeatprofError):
    '''Linear solve or factorization failure'''


class SingularSystem(HeatprofError):
    '''Stiffness matrix is not invertible on interior nodes'''


class NonPositiveProfile(HeatprofError):
    '''Doob weight is not strictly positive on interior nodes'''


class IdentityViolation(HeatprofError):
    '''Doob kernel identity or restriction masks are inconsistent'''


class PoleExclusionError(HeatprofError):
    '''Ball meets the excluded neighbourhood of a Green-profile pole'''


class InsufficientSamples(HeatprofError):
    '''Too few sample pairs for an envelope fit'''


class FitError(HeatprofError):
    '''Regression window is too short or not monotone'''


class CylinderOutOfRange(HeatprofError):
    '''Harnack cylinder is not covered by the stored solution'''


class UnknownGallery(HeatprofError):
    '''Requested gallery domain does not exist'''


class NegativityWarning(UserWarning):
    '''Crank-Nicolson produced values below -1e-10'''


class ClampWarning(UserWarning):
    '''Radius 1/sqrt(eta) exceeded the inner diameter and was clamped'''


class DegenerateClusterWarning(UserWarning):
    '''Eigenvalue spacing below 1e-10; ordering inside the cluster is arbitrary'''
