class AttrSegError(Exception):
    """Base class for toolkit errors."""


class GeometryError(AttrSegError, ValueError):
    """Invalid polygon, corrupt mask, or mismatched sizes."""


class ZeroAreaError(GeometryError):
    """Instance has zero area; callers skip it."""


class OntologyError(AttrSegError, ValueError):
    pass


class DataError(AttrSegError, ValueError):
    """Malformed or inconsistent annotation / prediction data."""


class ContractError(AttrSegError, ValueError):
    """A caller broke a documented precondition."""
