"""Error types shared by the simulation and estimation modules.

The CLI maps each family to an exit code (see ``pipeline.exit_code_for``).
"""


class MllabError(Exception):
    """Base class for every error raised on purpose by this project."""


class InvalidArgumentError(MllabError, ValueError):
    """Non-finite or out-of-domain argument."""


class DegenerateUpdateError(MllabError):
    """Bayes update left no posterior mass on the grid."""


class SingularDesignError(MllabError):
    """Regression design matrix is rank deficient."""


class UnderidentifiedError(MllabError):
    """Too few instruments or usable observations for the GMM estimator."""

    def __init__(self, message: str, n_instruments: int = 0, n_params: int = 0, n_obs: int = 0):
        super().__init__(
            f"{message} (instruments={n_instruments}, parameters={n_params}, observations={n_obs})"
        )
        self.n_instruments = n_instruments
        self.n_params = n_params
        self.n_obs = n_obs


class DegenerateTestError(MllabError):
    """Test statistic undefined, e.g. paired differences with zero variance."""


class ConfigurationError(MllabError, ValueError):
    """Scenario, experiment or population configuration is invalid."""


class SchemaError(MllabError):
    """Panel file does not carry the expected columns."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"Panel is missing columns: {', '.join(self.missing)}")


class ReplayMismatchError(MllabError):
    """Replayed run produced artifacts that differ from the manifest."""

    def __init__(self, mismatched):
        self.mismatched = list(mismatched)
        super().__init__(f"Replay differs for: {', '.join(self.mismatched)}")
