"""Registry of the thirteen loss objectives.

Integer codes are the contract between the high-level modules and the two
interchangeable computation backends; keep them stable.
"""

OBJECTIVES = (
    "triplet",
    "n-pairs",
    "opl",
    "snn",
    "supcon",
    "submod-triplet",
    "submod-snn",
    "submod-supcon",
    "gc-sf",
    "gc-cf",
    "logdet-sf",
    "logdet-cf",
    "fl",
)

OBJ_CODE = {name: i for i, name in enumerate(OBJECTIVES)}

# Objectives whose per-class term reads the Euclidean distance matrix.
NEEDS_DISTANCE = frozenset({"triplet", "submod-snn"})

# Objectives evaluable on a single-class batch (total-correlation flavor
# terms are all zero there); the rest require >= 2 classes.
SINGLE_CLASS_OK = frozenset({"fl", "gc-sf", "gc-cf", "logdet-sf", "logdet-cf"})

# Objectives whose per-anchor log arguments (row similarity sums minus one)
# must be positive for the value to exist.
NEEDS_POSITIVE_ROWSUM = frozenset({"n-pairs", "supcon"})

# Diminishing-returns property claimed for each objective; the lattice
# checker compares its empirical verdict against this column.
EXPECTED_PROPERTY = {
    "triplet": "not-submodular",
    "n-pairs": "submodular",
    "opl": "submodular",
    "snn": "not-submodular",
    "supcon": "not-submodular",
    "submod-triplet": "submodular",
    "submod-snn": "submodular",
    "submod-supcon": "submodular",
    "gc-sf": "submodular",
    "gc-cf": "submodular",
    "logdet-sf": "submodular",
    "logdet-cf": "submodular",
    "fl": "submodular",
}

GC_OBJECTIVES = frozenset({"gc-sf", "gc-cf"})
LOGDET_OBJECTIVES = frozenset({"logdet-sf", "logdet-cf"})
