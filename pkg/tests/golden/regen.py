"""Regenerate the golden fixtures. Run from the repo root:

    python3 tests/golden/regen.py

The files are raw canonical bytes, one value per file; the tests compare
freshly computed bytes against them, so regenerate only on a deliberate
format change.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from logpki.chronolog import ChronoLog
from logpki.ordmap import OrderedMap
from logpki.primitives import encode

HERE = os.path.dirname(os.path.abspath(__file__))


def _items(n):
    return [bytes([i]) * 4 for i in range(n)]


def build():
    out = {}
    out["encoded_scalars.bin"] = encode((b"bytes", 7, "text", True, None, (1, (2, b""))))

    log = ChronoLog(_items(8))
    out["chrono_digest_n3.bin"] = ChronoLog(_items(3)).digest()
    out["chrono_digest_n8.bin"] = log.digest()
    out["chrono_presence_n8_i5.bin"] = encode(log.prove_presence(5))
    out["chrono_extension_3_8.bin"] = encode(log.prove_extension(3))

    m = OrderedMap.empty()
    proofs = {}
    for k, v in ((b"k1", b"x"), (b"k2", b"y"), (b"k3", b"z")):
        m, proofs[k] = m.insert(k, v)
    out["ordmap_digest_n3.bin"] = m.digest()
    out["ordmap_add_k3.bin"] = encode(proofs[b"k3"])
    out["ordmap_presence_k2.bin"] = encode(m.prove_presence(b"k2"))
    out["ordmap_absence_k9.bin"] = encode(m.prove_absence(b"k9"))
    return out


if __name__ == "__main__":
    for name, blob in build().items():
        with open(os.path.join(HERE, name), "wb") as fh:
            fh.write(blob)
        print("wrote", name, len(blob), "bytes")
