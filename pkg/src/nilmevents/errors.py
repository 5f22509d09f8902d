"""Shared exception types."""


class DataError(ValueError):
    """Raised for malformed inputs: bad manifests, inconsistent payloads,
    schema violations, infeasible generator specs."""
