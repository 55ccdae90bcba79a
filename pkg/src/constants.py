RESULTS_FOLDER = "results/"
HYPERPARAMETERS_FOLDER = "hyperparameters/"
GRAPHS_FOLDER = "data/graphs/"
MDPS_FOLDER = "data/mdps/"
DEFAULT_HYPERPARAMETERS_FILENAME = "default.yaml"
FAST_HYPERPARAMETERS_FILENAME = "fast.yaml"
FALLBACK_HYPERPARAMETERS_ENV = "pendulum"

CHECKPOINT_FILENAME_TEMPLATE = "checkpoint_seed{seed}.bin"
METRICS_FILENAME_TEMPLATE = "metrics_seed{seed}.csv"
RUN_SUMMARY_FILENAME = "runs.yaml"
RESOLVED_CONFIG_FILENAME = "config.yaml"
COMPARISON_SUMMARY_FILENAME = "comparison_summary.csv"
PLOTS_FOLDER = "plots/"

ALGORITHMS = ["sac", "bsac"]

# Numerics
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
PRE_SQUASH_LIMIT = 15.0
CHECKPOINT_MAGIC = b"BSACPRM1"
CHECKPOINT_VERSION = 1

# Schemas
GRAPH_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1
MDP_SCHEMA_VERSION = 1

# Metrics CSV
METRICS_BASE_COLUMNS = ["env_step", "eval_return_mean", "eval_return_std", "q1_loss", "q2_loss", "v_loss",
                        "policy_loss"]
WALL_CLOCK_COLUMN = "wall_clock_s"
NOT_READY = "NA"

# Tabular soft iteration
SOFT_ITERATION_TOLERANCE = 1e-10
SOFT_ITERATION_MAX_ITERATIONS = 100_000

# Seed streams, derived from the run seed with `derive_seed()`
SEED_STREAMS = ["env", "init", "noise", "replay", "eval", "explore"]

# Pendulum. Angle is measured from the hanging position internally, observation and reward use the angle
# from upright.
PENDULUM_GRAVITY = 10.0
PENDULUM_LENGTH = 1.0
PENDULUM_MASS = 1.0
PENDULUM_DAMPING = 1.0  # Viscous, in 1/s
PENDULUM_MAX_TORQUE = 2.0
PENDULUM_MAX_SPEED = 8.0
PENDULUM_DT = 0.05
PENDULUM_MAX_STEPS = 200
PENDULUM_INIT_ANGLE_RANGE = 3.141592653589793
PENDULUM_INIT_SPEED_RANGE = 1.0

# Reacher2, two revolute joints with independent rotor dynamics
REACHER_LINK_LENGTHS = (0.5, 0.5)
REACHER_INERTIA = 0.1
REACHER_DAMPING = 0.1
REACHER_MAX_TORQUE = 1.0
REACHER_DT = 0.02
REACHER_MAX_STEPS = 200
REACHER_TARGET_RADIUS_RANGE = (0.3, 0.9)
REACHER_INIT_ANGLE_NOISE = 0.1
REACHER_CANONICAL_TARGET = (0.0, 0.7)
REACHER_REACHED_DISTANCE = 0.02
REACHER_CONTROLLER_KP = 1.0
REACHER_CONTROLLER_KD = 0.53

# HazardPointMass
HAZARD_MASS = 1.0
HAZARD_DAMPING = 0.5
HAZARD_THRUST_GAIN = 1.0
HAZARD_DT = 0.05
HAZARD_MAX_STEPS = 300
HAZARD_ARENA = 1.0  # Positions live in [-ARENA, ARENA]^2
HAZARD_GOAL = (0.7, 0.7)
HAZARD_GOAL_RADIUS = 0.1
HAZARD_CIRCLES = ((0.0, 0.2, 0.2), (0.4, -0.3, 0.15), (-0.4, 0.5, 0.15))  # (x, y, radius)
HAZARD_INFLUENCE = 0.2  # Distance from a hazard edge where the clearance probe starts to drop
HAZARD_COLLISION_PENALTY = 1.0
HAZARD_BATTERY_BASE_DRAIN = 0.001
HAZARD_BATTERY_THRUST_DRAIN = 0.004
HAZARD_START = (-0.7, -0.7)
HAZARD_START_NOISE = 0.1

# Harness plotting
CURVE_PADDING = 0.05
Z_SCORE_95 = 1.96
SEED_COLORS = ["skyblue", "y", "blueviolet", "hotpink", "r", "deeppink", "grey"]
MAP_ALGORITHM_TO_COLOR = {"sac": "r", "bsac": "blueviolet"}
