"""Numerical tolerances and fixed limits shared by every module."""

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNITARY_TOL = 1e-10
INVOLUTION_TOL = 1e-10
KRAUS_COMPLETENESS_TOL = 1e-10

MAX_QUBITS = 10

# denominator of the violation ratio below which the result is 0/0
INDETERMINATE_TOL = 1e-14
# margin above the classical bound before a ratio counts as a violation
VIOLATION_TOL = 1e-12

# weak-limit extrapolation points and the largest strength accepted
WEAK_LAMBDAS = (1e-2, 5e-3)
MAX_WEAK_LAMBDA = 0.3

# calibration: rank(v) == 2 iff s3 < RANK_RTOL * s1 <= s2
RANK_RTOL = 1e-8
CALIBRATION_NORM_TOL = 1e-10

FORMAT_VERSION = "weakreal/1"
