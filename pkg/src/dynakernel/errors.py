"""Exception types shared across the package.

Every error carries a machine-readable ``code`` so that the command line
front-end can emit it in per-record error rows.
"""


class DynakernelError(ValueError):
    code = "ERROR"

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


class SingularityError(DynakernelError):
    code = "SINGULARITY"


class DomainError(DynakernelError):
    code = "DOMAIN"


class OriginSingularityError(DynakernelError):
    code = "ORIGIN_SINGULARITY"


class UnsupportedOrderError(DynakernelError):
    code = "UNSUPPORTED_ORDER"


class RootFindError(DynakernelError):
    code = "ROOT_FIND_FAILURE"


class IntegrandError(DynakernelError):
    code = "INTEGRAND_FAILURE"


class TruncationError(DynakernelError):
    """Evaluation time below the basis' validity threshold."""

    code = "TRUNCATION_INSUFFICIENT"


class RunawayPathError(DynakernelError):
    code = "RUNAWAY_PATH"


class ContractError(DynakernelError):
    code = "CONTRACT"


class ConfigError(DynakernelError):
    code = "CONFIG"
