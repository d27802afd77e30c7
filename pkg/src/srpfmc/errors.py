"""Exception types.  Each carries a short machine-readable ``code``."""


class SrpfmcError(Exception):
    code = "error"


class ConfigError(SrpfmcError):
    code = "schema_violation"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{k}: {why}" for k, why in self.violations))


class RejectedMZero(SrpfmcError):
    code = "rejected_m_zero"


class NoConvergence(SrpfmcError):
    code = "no_convergence"


class OutOfDomain(SrpfmcError):
    code = "out_of_domain"


class ZeroWavevector(SrpfmcError):
    code = "zero_wavevector"


class QuadratureError(SrpfmcError):
    code = "quadrature_nonconvergence"


class AuditFailed(SrpfmcError):
    code = "audit_failed"


class TableCoverageExceeded(SrpfmcError):
    code = "table_coverage_exceeded"


class DegenerateEstimate(SrpfmcError):
    code = "degenerate"


class SupportOverlap(SrpfmcError):
    code = "support_overlap"


class BetaOutOfRange(SrpfmcError):
    code = "beta_out_of_range"


class NonDyadicSplit(SrpfmcError):
    code = "non_dyadic_split"
