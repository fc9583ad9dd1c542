"""Exception taxonomy shared across the kernel.

Every error carries a stable ``code`` string so HTTP layers and the CLI can
map failures without string-matching messages.
"""

from __future__ import annotations


class CohortkitError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)


class SchemaError(CohortkitError):
    code = "schema_error"


class DuplicateField(SchemaError):
    code = "duplicate_field"


class UnknownSchema(CohortkitError):
    code = "unknown_schema"


class UnknownTopic(CohortkitError):
    code = "unknown_topic"


class TopicExists(CohortkitError):
    code = "topic_exists"


class RecordValidationError(CohortkitError):
    """Raised when a whole batch is rejected; carries per-record violations."""

    code = "validation_failed"

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = violations or []


class OffsetBeyondEnd(CohortkitError):
    code = "offset_beyond_end"


class StorageError(CohortkitError):
    code = "storage_error"


class TokenUnknown(CohortkitError):
    code = "token_unknown"


class TokenExpired(CohortkitError):
    code = "token_expired"


class TokenUsed(CohortkitError):
    code = "token_used"


class EnrollmentClosed(CohortkitError):
    code = "enrollment_closed"


class UnknownUser(CohortkitError):
    code = "unknown_user"


class UnknownProject(CohortkitError):
    code = "unknown_project"


class DuplicateProject(CohortkitError):
    code = "duplicate_project"


class DuplicateSource(CohortkitError):
    code = "duplicate_source"


class ProtocolError(CohortkitError):
    """Protocol/questionnaire document failed validation; carries all findings."""

    code = "protocol_invalid"

    def __init__(self, message: str, findings=None):
        super().__init__(message)
        self.findings = findings or []


class InvalidRange(CohortkitError):
    code = "invalid_range"


class StateRequired(CohortkitError):
    code = "state_required"


class OAuthError(CohortkitError):
    """OAuth protocol failure; ``code`` mirrors the vendor error string."""

    code = "oauth_error"

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code


class VendorUnreachable(CohortkitError):
    code = "vendor_unreachable"


class PermanentAuthFailure(CohortkitError):
    code = "permanent_auth_failure"


class ConfigError(CohortkitError):
    code = "config_error"
