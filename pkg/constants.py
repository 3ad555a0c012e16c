"""
STGFormer Pose Lifter - Constants & Configuration Defaults
Contains architecture defaults, training schedule, metric protocol settings,
file-format magics and CLI exit codes.
"""

from pathlib import Path

# ============================================================================
# ARCHITECTURE DEFAULTS
# ============================================================================
NUM_BLOCKS = 6          # L, transformer layers
EMBED_DIM = 256         # F, feature embedding width
NUM_HEADS = 8           # H, split evenly across the time and space groups
SPATIAL_HOPS = 3        # J
TEMPORAL_HOPS = 3       # K
GCN_LAYERS = 2          # stacked propagation layers inside each MHR-GCN
SPATIAL_CLIP = 4        # D_s
TEMPORAL_CLIP = 16      # D_t
NUM_FRAMES = 81         # T
NUM_JOINTS = 17         # N
ROOT_JOINT = 0          # pelvis in both shipped topologies
LAYER_NORM_EPS = 1e-5

ACTIVATIONS = ("gelu", "identity")
DTYPES = ("float32", "float64")

# ============================================================================
# TRAINING DEFAULTS
# ============================================================================
BASE_LR = 0.001
LR_DECAY = 0.97         # per epoch
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
EPOCHS = 40
FULL_SCALE_BATCH_SIZE = 128  # full-dataset training
DESK_BATCH_SIZE = 8     # fits the 64-sequence synthetic fixtures

INPUT_SCALE = 0.005     # root-centered pixels -> network units
TARGET_SCALE = 0.001    # millimeters -> meters

# ============================================================================
# GRADIENT CHECK
# ============================================================================
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_STEP = 1e-5           # scaled by max(1, |theta|)
GRADCHECK_SAMPLES = 200         # entries per tensor when the tensor is larger
GRADCHECK_SCALE_FLOOR = 1e-6    # denominator floor for relative error

# Tiny double-precision model the harness runs on by default
GRADCHECK_MODEL = dict(
    num_frames=4, num_joints=5, skeleton="chain", embed_dim=8, num_heads=2,
    num_blocks=1, spatial_hops=2, temporal_hops=2, dtype="float64",
)

# ============================================================================
# EVALUATION PROTOCOL
# ============================================================================
PCK_THRESHOLD_MM = 150.0
AUC_THRESHOLDS_MM = tuple(float(t) for t in range(0, 155, 5))  # 31 points

# Human3.6M action names, used to label synthetic action segments
ACTIONS = (
    "Directions", "Discussion", "Eating", "Greeting", "Phoning",
    "Photo", "Posing", "Purchases", "Sitting", "SittingDown",
    "Smoking", "Waiting", "WalkDog", "Walking", "WalkTogether",
)

# ============================================================================
# SYNTHETIC DATA
# ============================================================================
SYNTH_FRAMES = 1024
SYNTH_STEP_MM = 5.0
SYNTH_SMOOTHING = 9             # moving-average window over the walk
SYNTH_FOCAL_PX = 1000.0
SYNTH_DISTANCE_MM = 5000.0
SYNTH_BONE_MM = 250.0           # bone length for topologies without a rest pose
SYNTH_REVERSION = 0.98          # per-frame pull of joint angles back to the rest pose

# Human3.6M rest pose: offset of each joint from its parent, mm, y pointing down
H36M_REST_OFFSETS_MM = (
    (0, 0, 0),                                          # pelvis (root)
    (-130, 0, 0), (0, 450, 0), (0, 440, 0),             # right hip, knee, ankle
    (130, 0, 0), (0, 450, 0), (0, 440, 0),              # left hip, knee, ankle
    (0, -230, 0), (0, -250, 0), (0, -110, 0), (0, -115, 0),  # spine, thorax, neck, head
    (150, 0, 0), (0, 280, 0), (0, 250, 0),              # left shoulder, elbow, wrist
    (-150, 0, 0), (0, 280, 0), (0, 250, 0),             # right shoulder, elbow, wrist
)

# ============================================================================
# FILE FORMATS
# ============================================================================
POSE_MAGIC = b"PSEQ"
ATTN_MAGIC = b"ATTN"
LABEL_MAGIC = b"ACTS"
FORMAT_VERSION = 1
POSE_CHANNELS = (2, 3)

CHECKPOINT_MANIFEST = "manifest.txt"
CHECKPOINT_PAYLOAD = "params.bin"
CHECKPOINT_CONFIG = "config.txt"

# ============================================================================
# SKELETON TOPOLOGIES
# ============================================================================
SKELETON_DIR = Path(__file__).resolve().parent / "skeletons"
SKELETONS = {
    "h36m17": SKELETON_DIR / "h36m_17.txt",
    "mpi13": SKELETON_DIR / "mpi_inf_3dhp_13.txt",
}

# ============================================================================
# CLI EXIT CODES
# ============================================================================
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
