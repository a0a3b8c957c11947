# Fixed project-wide; every ContentRef, entry hash and id is rendered as
# lowercase hex of this digest.
HASH_ALGORITHM = "sha256"
SIGNATURE_ALGORITHM = "ed25519"
DIGEST_HEX_LENGTH = 64
ZERO_DIGEST = "0" * DIGEST_HEX_LENGTH

LEDGER_MAGIC = b"PCL1"
LEDGER_FILENAME = "ledger.pcl"
STATE_DB_FILENAME = "state.db"
BLOB_DIRNAME = "blobs"
KEYS_DIRNAME = "keys"
LAYOUT_MARKER = "LAYOUT"
LAYOUT_VERSION = 1
LOCK_FILENAME = ".lock"

DEFAULT_INLINE_THRESHOLD = 1024
DEFAULT_MAX_BLOB_BYTES = 256 * 1024 * 1024

JSON_SCHEMA_VERSION = "1.0"

# URI scheme used in Fetched provenance to declare an explicit derivation
# from another BoL's shadow: provchain://<bol_id>/<node_id>
DERIVED_FROM_SCHEME = "provchain://"

ARTIFACT_KINDS = (
    "model",
    "license",
    "roster",
    "policy",
    "software",
    "datasheet",
    "document",
    "fusing-factors",
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INTEGRITY = 2
EXIT_DOMAIN = 3
