"""Exception types raised across the pipeline.

Every error that callers are expected to catch and act on (retry, drop a
group, abort a stage) has its own class so handling code never has to match
on message strings.
"""

from __future__ import annotations


class ForgeError(Exception):
    """Base class for all pipeline errors."""


# --- corpus ---------------------------------------------------------------

class FileUnreadable(ForgeError):
    def __init__(self, path: str, reason: str = ""):
        self.path = path
        self.reason = reason
        super().__init__(f"cannot read {path}" + (f": {reason}" if reason else ""))


class EncodingError(ForgeError):
    def __init__(self, path: str, line: int):
        self.path = path
        self.line = line
        super().__init__(f"{path}: invalid UTF-8 on line {line}")


# --- sampler --------------------------------------------------------------

class CorpusTooSmall(ForgeError):
    def __init__(self, have: int, need: int):
        self.have = have
        self.need = need
        super().__init__(f"corpus has {have} sentences, need at least {need}")


# --- prompting ------------------------------------------------------------

class UnknownSentenceId(ForgeError):
    def __init__(self, sentence_id: int):
        self.sentence_id = sentence_id
        super().__init__(f"sentence id {sentence_id} not in store")


class EmptyParagraph(ForgeError):
    pass


class TemplateError(ForgeError):
    pass


# --- llm gateway ----------------------------------------------------------

class GatewayError(ForgeError):
    pass


class InvalidRequest(GatewayError):
    pass


class AuthMissing(GatewayError):
    def __init__(self, env_var: str):
        self.env_var = env_var
        super().__init__(f"API credential not found in environment variable {env_var}")


class RateLimitedExhausted(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class UnrecognizedPromptShape(GatewayError):
    pass


# --- output parsing -------------------------------------------------------

class ParseError(ForgeError):
    pass


class MissingSection(ParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"section header '{name}:' not found")


class DuplicateSection(ParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"section header '{name}:' appears more than once")


class EmptySection(ParseError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"section '{name}' is present but blank")


class ScoreLineMissing(ParseError):
    pass


class ScoreOutOfRange(ParseError):
    def __init__(self, score: int):
        self.score = score
        super().__init__(f"score {score} outside [1, 10]")


class EmptyAfterNormalization(ParseError):
    pass


# --- curator --------------------------------------------------------------

class AllCandidatesFailed(ForgeError):
    def __init__(self, group_id: int):
        self.group_id = group_id
        super().__init__(f"no candidate for group {group_id} could be parsed")


class Unscorable(ForgeError):
    def __init__(self, group_id: int, candidate_index: int):
        self.group_id = group_id
        self.candidate_index = candidate_index
        super().__init__(
            f"candidate {candidate_index} of group {group_id} could not be scored"
        )


class EmptyCandidateList(ForgeError):
    pass


class DuplicateTaskKey(ForgeError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"task key '{key}' appears in more than one group")


# --- dataset io -----------------------------------------------------------

class CorruptCheckpoint(ForgeError):
    def __init__(self, path: str, line: int):
        self.path = path
        self.line = line
        super().__init__(f"{path}: malformed record on line {line}")


# --- cli ------------------------------------------------------------------

class ConfigError(ForgeError):
    pass
