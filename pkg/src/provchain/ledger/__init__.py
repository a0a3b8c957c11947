from provchain.ledger.keys import Keyring, KeyRegistry, Signer, verify_signature
from provchain.ledger.ledger import Ledger, VerificationReport, Violation

__all__ = [
    "Keyring",
    "KeyRegistry",
    "Ledger",
    "Signer",
    "VerificationReport",
    "Violation",
    "verify_signature",
]
