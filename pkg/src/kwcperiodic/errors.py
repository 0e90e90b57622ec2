class NonConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class ConfigError(ValueError):
    """Invalid run configuration; ``violations`` holds ``(tag, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"({tag}) {msg}" if tag.startswith("A") else f"[{tag}] {msg}"
                 for tag, msg in self.violations]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
