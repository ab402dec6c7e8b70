"""Cross-version fixtures: freshly computed bytes must equal the checked-in
files exactly.  A mismatch means the encoding or a tree convention changed,
which silently invalidates every digest ever published."""

import os

from golden.regen import build

HERE = os.path.join(os.path.dirname(__file__), "golden")


def test_golden_files_byte_exact():
    fresh = build()
    assert fresh, "no fixtures defined"
    for name, blob in fresh.items():
        path = os.path.join(HERE, name)
        assert os.path.exists(path), "missing fixture %s (run tests/golden/regen.py)" % name
        with open(path, "rb") as fh:
            on_disk = fh.read()
        assert on_disk == blob, "fixture drift in %s" % name


def test_golden_proofs_still_verify():
    from logpki.chronolog import ChronoLog, verify_presence
    from logpki.ordmap import verify_presence as ods_verify_presence
    from logpki.primitives import decode

    def _blob(name):
        with open(os.path.join(HERE, name), "rb") as fh:
            return fh.read()

    items = [bytes([i]) * 4 for i in range(8)]
    dg = _blob("chrono_digest_n8.bin")
    assert ChronoLog(items).digest() == dg
    proof = decode(_blob("chrono_presence_n8_i5.bin"))
    assert verify_presence(dg, items[5], proof)

    dg3 = _blob("ordmap_digest_n3.bin")
    pres = decode(_blob("ordmap_presence_k2.bin"))
    assert ods_verify_presence(dg3, b"k2", b"y", pres)
