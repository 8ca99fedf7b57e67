# message strings for user output
GRID_MISMATCH_MSG = "Fields live on different grids: {0} vs {1}."
INVALID_FIELD_MSG = "Field contains non-finite or out-of-range samples: {0}"
NEGATIVE_FIELD_MSG = "Field '{0}' must be non-negative, minimum sample is {1:.3e}."
INVALID_PARAMETER_MSG = "Invalid parameter {0}={1!r}: {2}"
INVALID_NORMALIZATION_MSG = "The electron profile g must have unit mass (got {0:.6f}); pass normalize_g=True to " \
                            "renormalize it explicitly."
INVALID_SPEC_MSG = "Invalid initial data specification: {0}"
CONFIG_ERROR_MSG = "Config error on line {0}: {1}"
STALE_STATE_MSG = "The cached potential does not correspond to the current particle positions; re-solve the field " \
                  "before computing diagnostics."
COUPLING_MSG = "Invalid coupling: {0}"
UNSYNCHRONIZED_MSG = "Snapshot times differ between the two runs: {0} vs {1}."
CONVERGENCE_MSG = "Solver did not converge after {0} iterations, final relative residual {1:.3e}."
GUARD_VIOLATION_MSG = "Electron mass m={0:.3e} fell below the L_K guard e^-(K-1)={1:.3e} (Bouchut lower bound " \
                      "C_g={2:.3e}); increase K."
TRUNCATION_MSG = "{0:.3%} of the particle mass lies outside the box; enlarge grid.L."
STEP_ERROR_MSG = "Time step failed at t={0:.6f}: {1}"
EXACT_CAP_MSG = "Exact transport is capped at N={0} particles (got N={1}); use w2_entropic instead."

SUPPORT_GUARD_MSG = "{0:.3e} of the source mass lies in the outer quarter of the box; the free-space solution may " \
                    "be polluted by truncation. Consider a larger half-width."
OUT_OF_BOX_MSG = "{0} particle(s) are outside the box and coast with zero field."
SINKHORN_MSG = "Entropic transport did not reach the marginal tolerance (last marginal error {0:.3e})."
FIT_FLAG_MSG = "Fitted constant {0:.3e} exceeds the battery constant {1:.3e} by more than 10x."
CFL_MSG = "Time step {0:.3e} exceeds the CFL bound {1:.3e} even after {2} halvings."
