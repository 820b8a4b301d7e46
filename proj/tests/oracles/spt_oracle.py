"""Reference SPT for a fixed key, URL, page and time, built with the `cryptography` package."""

import base64
import hashlib
import json
import pathlib
import struct
import sys

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from htmlwalk import canonical_text  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1] / "fixtures"
GOLDEN = ROOT / "golden"

SEED = bytes(range(1, 33))
URL = "https://example.test/login"
NOW = 1700000000

key = Ed25519PrivateKey.from_private_bytes(SEED)
der = key.public_key().public_bytes(serialization.Encoding.DER,
                                    serialization.PublicFormat.SubjectPublicKeyInfo)
log_id = hashlib.sha256(der).digest()

html = (ROOT / "demo_site" / "login.html").read_text(encoding="utf-8")
url_hash = hashlib.sha256(URL.encode()).hexdigest()
content_hash = hashlib.sha256(canonical_text(html).encode("utf-8")).hexdigest()
record = struct.pack(">BI", 1, NOW) + url_hash.encode() + content_hash.encode()
assert len(record) == 133
signature = key.sign(hashlib.sha256(record).digest())
header = struct.pack(">BI", 1, NOW) + log_id + signature
assert len(header) == 101

(GOLDEN / "log_key.der").write_bytes(der)
(GOLDEN / "log_key.pem").write_bytes(key.private_bytes(
    serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
    serialization.NoEncryption()))
(GOLDEN / "spt_vector.json").write_text(json.dumps({
    "seed_hex": SEED.hex(),
    "url": URL,
    "html_file": "demo_site/login.html",
    "now": NOW,
    "url_hash": url_hash,
    "content_hash": content_hash,
    "log_id_hex": log_id.hex(),
    "log_id_b64": base64.b64encode(log_id).decode(),
    "signature_hex": signature.hex(),
    "spt": base64.b64encode(header).decode(),
}, indent=2) + "\n")
