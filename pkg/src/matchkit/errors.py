"""Exception types shared across the package."""


class MatchkitError(Exception):
    """Base class for all matchkit errors."""

    code = "error"


class MalformedTable(MatchkitError):
    """Input table has no header or too many ragged rows."""

    code = "malformed_table"


class DuplicateAttribute(MatchkitError):
    """Two columns collide after name normalization."""

    code = "duplicate_attribute"


class SchemaParseError(MatchkitError):
    """Target schema document is structurally invalid."""

    code = "schema_parse_error"


class EmptySchema(MatchkitError):
    code = "empty_schema"


class DuplicateMatcherId(MatchkitError):
    code = "duplicate_matcher_id"


class NoMatchersRegistered(MatchkitError):
    code = "no_matchers_registered"


class PluginFailed(MatchkitError):
    """A plugin matcher exited nonzero or produced unparsable output."""

    code = "plugin_failed"


class InvalidTransition(MatchkitError):
    """Candidate status change not allowed from its current status."""

    code = "invalid_transition"


class InvalidWeight(MatchkitError):
    code = "invalid_weight"


class EmptyGroundTruth(MatchkitError):
    code = "empty_ground_truth"


class NothingToUndo(MatchkitError):
    code = "nothing_to_undo"


class NothingToRedo(MatchkitError):
    code = "nothing_to_redo"


class UnknownSeq(MatchkitError):
    code = "unknown_seq"


class ModelUnavailable(MatchkitError):
    code = "model_unavailable"


class MalformedModelResponse(MatchkitError):
    """Model output failed structural validation, after one retry."""

    code = "malformed_model_response"


class AgentTimeout(MatchkitError):
    code = "agent_timeout"


class UnknownKey(MatchkitError):
    """No agent memory entry for the given composite key."""

    code = "unknown_key"


class UnknownSession(MatchkitError):
    code = "unknown_session"


class UnknownCandidate(MatchkitError):
    code = "unknown_candidate"


class BadRequest(MatchkitError):
    """Generic invalid request parameter (bad filter, unknown format...)."""

    code = "bad_request"


class PayloadTooLarge(MatchkitError):
    code = "payload_too_large"
