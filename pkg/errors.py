"""
Errors Module - Planner Exceptions
Every module raises these; cli.py maps them to exit codes
and app.py turns them into error messages
"""


class PlannerError(Exception):
    """Base class for all planner errors"""


class ValidationError(PlannerError):
    """
    A value breaks a rule (negative demand, duplicate VM id, ...)

    Args:
        message (str): What went wrong
        field (str): Name of the offending field, if there is one
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class InputFormatError(ValidationError):
    """File was read but its contents could not be parsed"""


class InputFileError(PlannerError):
    """File is missing or cannot be read"""
