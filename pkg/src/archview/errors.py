"""Exception hierarchy shared by every archview module."""


class ArchViewError(Exception):
    """Base class for all archview errors."""


class ModelError(ArchViewError):
    pass


class DuplicateIdError(ModelError):
    pass


class LayerMismatchError(ModelError):
    pass


class DuplicateEdgeError(ModelError):
    pass


class UnknownEntityError(ModelError):
    """Raised when a seed, endpoint, service or policy id does not resolve."""


class InvalidModelError(ModelError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.subject}: {v.code}" for v in self.violations[:5])
        super().__init__(f"model has {len(self.violations)} violation(s): {lines}")


class NotAPolicyError(ModelError):
    pass


class UnknownZoneError(ModelError):
    pass


class EmptyViewpointError(ArchViewError):
    pass


class NotAPolytreeError(ArchViewError):
    def __init__(self, witness=None):
        self.witness = witness
        super().__init__("graph is not a polytree")


class TooLargeError(ArchViewError):
    pass


class InvalidFormatError(ArchViewError):
    pass


class ParseError(ArchViewError):
    """Raised by :func:`archview.adl.load_model` when the source has errors."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        where = f" at {first.line}:{first.column}: {first.message}" if first else ""
        super().__init__(f"{len(self.diagnostics)} error(s){where}")
