"""Shared constants for snakeloop."""

import math

# Header field carried by every CSV/JSON artifact
SCHEMA_VERSION = 1

TWO_PI = 2.0 * math.pi

# Numerical thresholds used across modules
HYPERBOLICITY_TOL = 1e-6
REVERSIBILITY_TOL = 1e-10
INVOLUTION_TOL = 1e-12
EQUILIBRIUM_TOL = 1e-12
SINGULAR_RATIO = 1e-12

# Artifact file names, keyed by the command that produces them
ARTIFACTS = {
    "spectrum": "spectrum.json",
    "wavetrain": "wavetrain.json",
    "family": "family.csv",
    "front-loop": "front_loop.csv",
    "front-profiles": "front_profiles.json",
    "classify": "classification.json",
    "nf-verify": "nf_expansion.csv",
    "nf-verify-report": "nf_expansion.json",
    "nf-match": "nf_match.json",
    "nf-sweep": "nf_sweep.csv",
    "phase-plot": "front_loop.svg",
    "prediction": "prediction_phi0_{tag}.csv",
    "localized": "localized_phi0_{tag}.csv",
    "localized-summary": "localized_phi0_{tag}.json",
    "compare": "compare_phi0_{tag}.json",
    "plot": "bifurcation_phi0_{tag}.svg",
}


def phi0_tag(phi0: float) -> str:
    """File-name tag for a symmetry phase φ₀ ∈ {0, π}."""
    return "0" if phi0 == 0.0 else "pi"
