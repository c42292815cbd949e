import os

# Oracle grid defaults for the DKV potential: the right tail decays slowly (0.444 for the
# A=10.25, B=12.5 ground state), hence the long right side of the box
X_MIN = float(os.getenv("CES_X_MIN", "-20"))
X_MAX = float(os.getenv("CES_X_MAX", "60"))
STEP = float(os.getenv("CES_STEP", "5e-3"))
SCHEME = os.getenv("CES_SCHEME", "numerov")
MIN_GRID_POINTS = 64

# Number of decay lengths kept on each side when a grid is derived from analytic levels
DECAY_LENGTHS = float(os.getenv("CES_DECAY_LENGTHS", "18"))

# Liouville checks run on r in [R_CUTOFF, R_MAX]
R_CUTOFF = float(os.getenv("CES_R_CUTOFF", "1e-2"))
R_MAX = float(os.getenv("CES_R_MAX", "10"))

# Radius (in x) around wavefunction nodes excluded from superpotential residual scans
NODE_MASK = float(os.getenv("CES_NODE_MASK", "1e-3"))

# Levels closer than this to the edge of the normalizability window are rejected
WINDOW_MARGIN = 1e-12

ENERGY_TOL = float(os.getenv("CES_ENERGY_TOL", "1e-4"))
OVERLAP_TOL = float(os.getenv("CES_OVERLAP_TOL", "1e-6"))
RESIDUAL_TOL = float(os.getenv("CES_RESIDUAL_TOL", "1e-8"))
SUSY_TOL = float(os.getenv("CES_SUSY_TOL", "1e-6"))
CLASS_ODE_TOL = float(os.getenv("CES_CLASS_ODE_TOL", "1e-12"))
NATANZON_TOL = float(os.getenv("CES_NATANZON_TOL", "1e-10"))
# Residual of -psi'' + (V - E) psi relative to max |psi|, analytic levels and Natanzon levels
SCHRODINGER_TOL = float(os.getenv("CES_SCHRODINGER_TOL", "1e-6"))
NATANZON_PSI_TOL = float(os.getenv("CES_NATANZON_PSI_TOL", "1e-5"))

# Bisection budget of the oracle eigensolver
MAX_BISECTION_STEPS = int(os.getenv("CES_MAX_BISECTION_STEPS", "200"))
INVERSE_ITERATIONS = int(os.getenv("CES_INVERSE_ITERATIONS", "3"))
MAX_EIGENPAIRS = 10

OUTPUT_DIR = os.getenv("CES_OUTPUT_DIR", ".")

# Highest level index scanned when no n-max is given
N_MAX = int(os.getenv("CES_N_MAX", "50"))
