"""Exception types shared across the package."""


class MadplLabError(Exception):
    """Base class for package errors."""


class ParseError(MadplLabError):
    """Raised when a config or corpus file cannot be parsed."""


class SchemaError(MadplLabError):
    """Raised when a parsed config violates a structural invariant."""


class UnknownDomain(MadplLabError):
    pass


class UnknownSlot(MadplLabError):
    pass


class UnknownAct(MadplLabError):
    pass


class SamplingExhausted(MadplLabError):
    """Goal rejection sampling failed; the world config is degenerate."""


class DimensionMismatch(MadplLabError):
    pass


class MissingValue(MadplLabError):
    """A lexicalization source does not carry the requested slot."""


class StaleCache(MadplLabError):
    """A backward pass was given a cache from a mismatched forward."""


class EmptyCorpus(MadplLabError):
    pass


class DivergenceError(MadplLabError):
    """Training produced non-finite parameters."""


class MissingArtifact(MadplLabError):
    """A pipeline stage input (world dir, corpus, checkpoint, CSV) is absent."""


class MalformedCsv(MadplLabError):
    """A metrics CSV cannot be parsed or merged."""
