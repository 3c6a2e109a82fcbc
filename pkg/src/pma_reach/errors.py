"""Exception types shared across the package."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid model, controller, scenario or file configuration.

    ``key`` and ``line`` are filled in when the error comes from a config file.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        self.reason = message
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NumericFault(ArithmeticError):
    """A state, control or derivative became NaN/Inf.

    Carries the step index where it happened, the channel when known, and the
    partial trajectory log recorded up to (not including) the faulty step.
    """

    def __init__(self, message: str, step: int | None = None, channel: int | None = None):
        self.step = step
        self.channel = channel
        self.log = None
        parts = [message]
        if step is not None:
            parts.append(f"step {step}")
        if channel is not None:
            parts.append(f"channel {channel}")
        super().__init__(", ".join(parts))
