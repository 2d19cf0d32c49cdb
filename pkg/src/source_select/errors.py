"""Exception and warning types shared across the package."""


class SourceSelectError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SourceSelectError):
    """Command line arguments could not be interpreted."""


# -- dataset ---------------------------------------------------------------

class MalformedCsv(SourceSelectError):
    """A CSV row has the wrong length or an unparseable feature value."""


class BadLabel(SourceSelectError):
    """A label cell is not 0 or 1."""


class MissingColumn(SourceSelectError):
    """A column named in the schema is absent from the file."""


class MissingValueRejected(SourceSelectError):
    """An empty cell was found under the ``reject`` missing policy."""


class TooFewExamples(SourceSelectError):
    """A label class has fewer examples than the number of folds."""


class NotEnoughRows(SourceSelectError):
    """More rows were requested than the source holds."""


class SchemaMismatch(SourceSelectError):
    """Two sources do not share the same feature names."""


class UnknownSourceId(SourceSelectError):
    """A plan or command referenced a source id that does not exist."""


# -- synth -----------------------------------------------------------------

class InvalidScenario(SourceSelectError):
    """Scenario parameters violate their invariants."""


# -- models ----------------------------------------------------------------

class EmptyMatrix(SourceSelectError):
    """An operation requires at least one row."""


class SingleClassUnregularized(SourceSelectError):
    """Unpenalized logistic fit on a single-class sample has no optimum."""


class NonFinite(SourceSelectError):
    """A non-finite value was found in model inputs or the loss."""


class DimensionMismatch(SourceSelectError):
    """Feature dimension does not match the fitted object."""


# -- divergence ------------------------------------------------------------

class EmptySource(SourceSelectError):
    """A divergence estimator was handed a source with no rows."""


class GroupVocabularyMismatch(SourceSelectError):
    """Two group summaries do not share the same group identifiers."""


class AbsoluteContinuityViolation(SourceSelectError):
    """p places mass where q is zero, so KL(p || q) is infinite."""


class DegenerateCovariance(UserWarning):
    """Pooled data had lower rank than the requested projection size.

    Emitted as a warning: the estimator falls back to the achievable
    number of components instead of failing.
    """


# -- accumulate ------------------------------------------------------------

class PlanExceedsData(SourceSelectError):
    """An accumulation plan asks for more rows than the sources hold."""


# -- eval ------------------------------------------------------------------

class SingleClass(SourceSelectError):
    """A metric needs at least one positive and one negative label."""


class NoEligibleGroups(SourceSelectError):
    """Every group fell below the minimum size for group metrics."""


class DegenerateVariance(SourceSelectError):
    """Correlation is undefined when either input has zero variance."""


# -- cli -------------------------------------------------------------------

class EmptyResults(SourceSelectError):
    """No results were supplied to a table writer."""
