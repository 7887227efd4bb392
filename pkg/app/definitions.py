# Project-wide constants (edit to your environment)

EXPERIMENT_NAME = "photonic_neural_network"
REGISTERED_MODEL_NAME = "photonic_network_model"
MODEL_ALIAS = "Production"
REMOTE_SERVER_URI = "http://127.0.0.1:5000"  # change to your MLflow tracking server URI

# Numerics
DEFAULT_BASIS_CAP = 100_000  # largest Fock basis an experiment may allocate
NORM_TOLERANCE = 1e-12
UNITARY_TOLERANCE = 1e-8  # accepted deviation ||U^dag U - I|| for decomposition
PERMANENT_MAX_SIZE = 12
FINITE_DIFFERENCE_STEP = 1e-5

# Scattering solver
RICHARDSON_TOLERANCE = 1e-4
PULSE_FWHM_SPAN = 8.0  # grid width in pulse FWHMs
STEPS_PER_DECAY_TIME = 10  # grid points per 1/Gamma and per 1/kappa
STEPS_PER_PULSE_FWHM = 20
DECAY_TAIL = 10.0  # extra 1/Gamma times kept on each side of the pulse
SYMMETRY_TOLERANCE = 1e-8

# Loss correction
SHARED_RECOVERY_LIMIT = 2.0 / 3.0  # best mean average channel fidelity of one recovery over both loss locations

# Results
DEFAULT_OUT_DIR = "runs"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
