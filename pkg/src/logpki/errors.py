"""Exception taxonomy shared by the maintainers and client protocol engines.

Maintainer-side rejections derive from RequestRejected: a rejected request
appends nothing to any log.  Client-side protocol failures derive from
ProtocolAbort and carry the label of the first failed check; those labels are
what scenario expectations and transcripts refer to.
"""


class RequestRejected(Exception):
    """A log maintainer refused a request; state is unchanged."""

    label = "rejected"


class OverlapError(RequestRejected):
    label = "rgx-overlap"


class UnknownIdError(RequestRejected):
    label = "unknown-id"


class DuplicateIdError(RequestRejected):
    label = "duplicate-id"


class DuplicateMasterError(RequestRejected):
    label = "duplicate-master"


class BadSignatureError(RequestRejected):
    label = "bad-signature"


class StaleTimeError(RequestRejected):
    label = "stale-time"


class NoMappingError(RequestRejected):
    label = "no-mapping"


class BlacklistedError(RequestRejected):
    label = "blacklisted"


class UnmappedSubjectError(RequestRejected):
    label = "unmapped-subject"


class NoPriorRegistrationError(RequestRejected):
    label = "no-prior-registration"


class SyncIntegrityError(RequestRejected):
    label = "sync-integrity"


class ManagedScopeError(RequestRejected):
    label = "out-of-scope"


class HasCertificatesError(RequestRejected):
    """Absence proof requested for a domain that has active certificates."""

    label = "present"


class NotActiveError(RequestRejected):
    """Verification refusal; carries the absence response as evidence."""

    label = "cert-not-active"

    def __init__(self, message, response=None):
        super().__init__(message)
        self.response = response


class UnknownSnapshotError(RequestRejected):
    """Extension requested from a (digest, size) pair this log never had."""

    label = "unknown-snapshot"


class ProtocolAbort(Exception):
    """A client-side check failed; ``step`` names the first failed check."""

    def __init__(self, step, message=""):
        super().__init__(message or step)
        self.step = step


class ForkAlarm(ProtocolAbort):
    """An extension proof against the cached (digest, size) pair failed."""

    def __init__(self, peer, message=""):
        super().__init__("fork-alarm", message)
        self.peer = peer


class OracleIntegrityError(Exception):
    """Ground-truth key lifecycle violated (test harness bug, not an attack)."""
