"""Exception types shared across the package."""


class GraspForgeError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(GraspForgeError):
    """Input points are coplanar or too few to define a volume."""


class DegenerateNormal(GraspForgeError):
    """SDF gradient magnitude too small to define a surface normal."""


class ProjectionDiverged(GraspForgeError):
    """Surface projection failed to converge within the iteration budget."""


class InsufficientSamples(GraspForgeError):
    """Fewer than three surface samples survived filtering."""


class ParseError(GraspForgeError):
    """A description or geometry file could not be parsed."""


class InvalidModel(GraspForgeError):
    """A hand description violates its structural invariants."""


class NoSolution(GraspForgeError):
    """IK found no configuration meeting all post-conditions.

    This is an expected, recoverable outcome used to reject a proposal.
    """


class QPInfeasible(GraspForgeError):
    """Phase-1 found no point satisfying the QP inequality constraints."""


class QPMaxIterations(GraspForgeError):
    """Active-set iteration limit reached before KKT conditions held."""


class NoFeasibleTriple(GraspForgeError):
    """No dynamically feasible contact triple exists among the candidates."""


class NoGeometry(GraspForgeError):
    """An empty or unusable object model was supplied to the pipeline."""
