"""
Provides the exception and warning classes raised by :mod:`apifuzz`.

Exceptions subclass a builtin so that callers can catch either the specific class or
the builtin it refines (e.g. :class:`ConfigurationError` is a :class:`ValueError`).
"""


class ConfigurationError(ValueError):
    """
    Invalid user configuration: flags, config files, filters or rule sets.
    """


class SchemaLoadError(RuntimeError):
    """
    The root schema document could not be read or parsed.
    """


class AuthError(RuntimeError):
    """
    A login call failed, or its response did not contain the expected token.
    """


class BindingError(LookupError):
    """
    A dynamic value could not be extracted from a recorded response.

    Parameters
    ----------
    message : str
        Description of the failure.

    pointer : tuple, optional
        Path segments that could not be followed. (Default: ``()``)
    """

    def __init__(self, message, pointer=()):
        super().__init__(message)
        self.pointer = tuple(pointer)
        return


class TransportError(OSError):
    """
    A request could not be delivered or no response was received.
    """


class SessionAbort(RuntimeError):
    """
    The fuzzing session cannot continue (e.g. the target is unreachable).
    """


class ReplayError(RuntimeError):
    """
    A plan file is malformed or cannot be executed.
    """


class ApiFuzzWarning(UserWarning):
    """
    Base class for warnings issued by :mod:`apifuzz`.
    """


class GenerationWarning(ApiFuzzWarning):
    """
    Input generation could not satisfy every declared constraint.
    """


class LinkWarning(ApiFuzzWarning):
    """
    A link definition uses a feature that is accepted but not followed.
    """
