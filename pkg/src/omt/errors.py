"""Exception hierarchy shared by all omt modules."""


class OmtError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(OmtError):
    def __init__(self, deviation: float):
        self.deviation = deviation
        super().__init__(f"matrix is not Hermitian (||A - A*|| = {deviation:.3e})")


class IndefiniteMatrix(OmtError):
    def __init__(self, eigenvalue: float):
        self.eigenvalue = eigenvalue
        super().__init__(f"matrix has a significantly negative eigenvalue ({eigenvalue:.3e})")


class InconsistentSystem(OmtError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"D*X*D = L has no solution on the defect space (residual {residual:.3e})")


class DimensionMismatch(OmtError):
    pass


class NotContraction(OmtError):
    def __init__(self, index, norm: float):
        self.index = index
        self.norm = norm
        label = "operator" if index is None else f"operator {index + 1}"
        super().__init__(f"{label} has norm {norm:.12g} > 1")


class NotCommuting(OmtError):
    def __init__(self, i: int, j: int, commutator_norm: float):
        self.i = i
        self.j = j
        self.commutator_norm = commutator_norm
        super().__init__(
            f"operators {i + 1} and {j + 1} do not commute "
            f"(||[T{i + 1},T{j + 1}]|| = {commutator_norm:.3e})"
        )


class BlockLeakage(OmtError):
    def __init__(self, index: int, norm: float):
        self.index = index
        self.norm = norm
        super().__init__(
            f"operator {index + 1} has off-diagonal block of norm {norm:.3e} "
            "with respect to the unitary/c.n.u. splitting"
        )


class UnsupportedKind(OmtError):
    def __init__(self, kind: str, known: tuple):
        self.kind = kind
        super().__init__(f"unknown generator kind {kind!r}; known kinds: {', '.join(known)}")


class NotIsometric(OmtError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"constructed map is not isometric (||V*V - I|| = {residual:.3e})")


class ResidualExceeded(OmtError):
    def __init__(self, which: str, norm: float, tolerance: float):
        self.which = which
        self.norm = norm
        self.tolerance = tolerance
        super().__init__(f"residual of {which} is {norm:.3e} (tolerance {tolerance:.3e})")


class NumericalRadiusExceeded(OmtError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"numerical radius {value:.12g} exceeds 1")


class TailBoundExceeded(OmtError):
    def __init__(self, tail: float, degree: int):
        self.tail = tail
        self.degree = degree
        super().__init__(
            f"observability tail {tail:.3e} still above tolerance at truncation degree {degree}"
        )


class MinimalityFailure(OmtError):
    def __init__(self, gap: int):
        self.gap = gap
        super().__init__(f"lift space is not saturated by the Krylov span (dimension gap {gap})")


class NearSingularResolvent(OmtError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"(I - z T*) is numerically singular (condition estimate {condition:.3e})")


class ParseError(OmtError):
    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class ValidationError(OmtError):
    def __init__(self, detail: list):
        self.detail = detail
        super().__init__("; ".join(str(d) for d in detail))
