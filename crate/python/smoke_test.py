"""Smoke test for the pyflyprac extension.

Build and install first:  maturin build --release -m crates/python/Cargo.toml
then pip install the wheel, and run  python python/smoke_test.py
"""

import random

import pyflyprac as fp


def main():
    assert fp.gf_mul(2, 0x80) == 0x1D
    assert fp.gf_mul(7, fp.gf_inv(7)) == 1
    assert fp.gf_mul(1, 1, q=1) == 1
    assert fp.crc8(b"") == 0

    cfg = fp.GenerationConfig(g=8, l=40, s=4, R=5)
    rng = random.Random(1)
    originals = [bytes(rng.randrange(256) for _ in range(cfg.l)) for _ in range(cfg.g)]
    enc = fp.Encoder(originals, cfg, seed=2)

    # Noiseless round trip.
    packets = []
    while len(packets) < 12:
        packets += enc.next_group()
    assert all(p.outer_ok(cfg) for p in packets)
    assert fp.decode(packets, cfg) == originals
    p = packets[0]
    assert fp.Packet.from_bytes(p.to_bytes(cfg), cfg) == p

    # A group with one corrupted packet is flagged and repaired.
    group = enc.next_group()
    sent = group[1]
    noisy = fp.Channel(0.003, seed=3)
    received = list(group)
    while received[1].outer_ok(cfg):
        received[1] = noisy.transmit(sent, cfg)
    broken = fp.estimate(received, cfg)
    assert broken, "corruption should show up in some column"
    repaired, status = fp.recover_group(received, cfg)
    assert status[0] == "valid" and status[1] in ("recovered", "reconstructed", "invalid")
    if status[1] != "invalid":
        assert repaired[1].outer_ok(cfg)

    row = fp.analyze(1e-5, 5)
    assert abs(row["p_fpe"] - 7.99696e-9) / 7.99696e-9 < 1e-4

    m = fp.simulate("g = 10\nl = 40\ns = 4\nR = 5\nepsilon = 1e-3\ntrials = 5\n")
    assert m["trials"] == 5 and m["total_transmissions"] >= 10
    assert 0.0 <= m["recovery_ratio"] <= 1.0

    try:
        fp.GenerationConfig(g=8, l=41, s=4, R=5)
    except ValueError:
        pass
    else:
        raise AssertionError("l not divisible by s must be rejected")

    print("pyflyprac smoke test: ok", m)


if __name__ == "__main__":
    main()
