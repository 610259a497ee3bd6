# exciton_pimc/constants.py
# Atomic units throughout: hbar = 1, Hartree, bohr, electron masses.

HBAR = 1.0
K_B_HARTREE_PER_K = 3.1668115634e-6

MALA_TARGET_ACCEPTANCE = 0.574
RWM_TARGET_ACCEPTANCE = 0.234
ADAPT_RATE = 0.05
ADAPT_WINDOW = 50
TUNING_TOLERANCE = 0.1

WARMUP_FRACTION = 0.05
MIN_WARMUP_STEPS = 10_000
PROGRESS_INTERVAL = 100_000

MIN_BATCH_SIZE = 1_000
TARGET_BATCH_COUNT = 40
LJUNG_BOX_LAGS = 13
CONFIDENCE_Z = 1.96

HISTOGRAM_BINS = 50
HISTOGRAM_PADDING = 0.2

SYMMETRY_TOLERANCE = 1e-10
ORACLE_SIZE_CAP = 20_000
ORACLE_MIN_POINTS = 16
ORACLE_BOUNDARY_TOLERANCE = 1e-8


def beta_from_kelvin(temperature_k: float) -> float:
    """Inverse temperature in 1/Hartree."""
    if temperature_k <= 0:
        raise ValueError(f"temperature must be positive, got {temperature_k} K")
    return 1.0 / (K_B_HARTREE_PER_K * temperature_k)
