"""Independent envelope construction: PBKDF2-HMAC-SHA256 + AES-256-GCM (OpenSSL),
plus the RFC 8032 Ed25519 test vector 1 and SHA-256 account/cid derivations."""
import base64
import hashlib
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

password = b"Ab3#Ab3#Ab3#Ab3#"
salt = bytes(range(16))
nonce = bytes(range(100, 112))
report = (b"antibody_gmfi=150\ndiagnostic=inconclusive\nlab_id=00112233445566778899aabbccddeeff00112233\n"
          b"test_id=T-0001\ntimestamp_ms=1700000000000")
signature = bytes([0xAB]) * 64
plaintext = len(signature).to_bytes(2, "big") + signature + report
key = hashlib.pbkdf2_hmac("sha256", password, salt, 100000, 32)
body = AESGCM(key).encrypt(nonce, plaintext, None)
envelope = b"HLN1" + salt + nonce + body
print("pbkdf2_key", key.hex())
print("envelope_len", len(envelope))
print("envelope_sha256", hashlib.sha256(envelope).hexdigest())
print("envelope_tail32", envelope[-32:].hex())

sk = bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
k = Ed25519PrivateKey.from_private_bytes(sk)
pub = k.public_key().public_bytes_raw()
print("rfc8032_1_pub", pub.hex())
print("rfc8032_1_sig", k.sign(b"").hex())
print("account_of_rfc_pub", hashlib.sha256(pub).digest()[:20].hex())
print("account_of_abc", hashlib.sha256(b"\x01" * 32).digest()[:20].hex())
print("cid_x", "cid:" + hashlib.sha256(b"x").hexdigest())
