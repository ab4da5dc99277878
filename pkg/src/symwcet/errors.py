"""Error types raised across the analysis pipeline.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map them onto stable exit codes.
"""


class SymwcetError(Exception):
    """Base class for all analyzer errors."""


class DocumentError(SymwcetError):
    """The program document is malformed or fails validation."""


class IrreducibleLoop(SymwcetError):
    """The CFG contains a cycle that is not a natural loop.

    `cycle` holds one offending block cycle for diagnostics.
    """

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(
            "irreducible control flow: cycle %s has no dominating header"
            % " -> ".join(self.cycle)
        )


class SymbolicValuePresent(SymwcetError):
    """A numeric operation hit an unresolved identifier."""


class IncomparableLoops(SymwcetError):
    """A finite iteration restriction was applied across unrelated loops."""


class NotMultiple(SymwcetError):
    """eval_seq(eta, e, n) requires n to be a multiple of e."""


class FuelExhausted(SymwcetError):
    """The rewrite engine hit its step budget before reaching a normal form."""


class TypeMismatch(SymwcetError):
    """A binding's value does not fit the identifier's use site."""


class UnboundIdentifier(SymwcetError):
    """Full evaluation requires a binding for every identifier."""


class AmbiguousTarget(SymwcetError):
    """An annotation or split target matches several tree leaves."""


class NonAncestorLoop(SymwcetError):
    """An annotation references a loop that does not enclose its target."""


class UnknownBlock(SymwcetError):
    """A target references a block or leaf that does not exist."""


class DuplicateVariantId(SymwcetError):
    """Split variants must have pairwise distinct ids."""


class PathBudgetExceeded(SymwcetError):
    """Path enumeration exceeded the configured work budget."""
