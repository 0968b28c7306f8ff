"""Regenerates the frozen reference data under tests/data.

Run from the repository root:  python3 tests/fixtures/make_fixtures.py
Needs numpy and nibabel. Nothing here imports the C++ library.
"""

import json
import math
from pathlib import Path

import nibabel as nib
import numpy as np

MASK = (1 << 64) - 1
OUT = Path(__file__).resolve().parent.parent / "data"


def splitmix(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK


class Xoshiro:
    def __init__(self, seed):
        st = seed
        self.s = []
        for _ in range(4):
            st, v = splitmix(st)
            self.s.append(v)

    @classmethod
    def stream(cls, seed, k):
        st = seed
        v = 0
        for _ in range(k + 1):
            st, v = splitmix(st)
        return cls(v)

    def next(self):
        s = self.s
        result = (rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def below(self, n):
        # Lemire: high word of x*n, rejecting the biased low region.
        threshold = (2**64 - n) % n
        while True:
            m = self.next() * n
            if (m & MASK) >= threshold:
                return m >> 64

    def unit(self):
        return (self.next() >> 11) * 2.0**-53


def pearson(x, y):
    n = len(x)
    mx = sum(x) / n  # sequential float sums, same order as the library
    my = sum(y) / n
    sxx = syy = sxy = 0.0
    for a, b in zip(x, y):
        dx, dy = a - mx, b - my
        sxx += dx * dx
        syy += dy * dy
        sxy += dx * dy
    if sxx <= 0 or syy <= 0:
        return None
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def bootstrap(x, y, n_boot, size, seed):
    rs = []
    redraws = 0
    for b in range(n_boot):
        g = Xoshiro.stream(seed, b)
        while True:
            idx = [g.below(len(x)) for _ in range(size)]
            r = pearson([x[i] for i in idx], [y[i] for i in idx])
            if r is not None:
                rs.append(r)
                break
            redraws += 1
    return rs, redraws


def rng_reference():
    out = {}
    for seed in (0, 42, 0xDEADBEEF):
        g = Xoshiro(seed)
        out[f"next_{seed}"] = [str(g.next()) for _ in range(8)]
    g = Xoshiro(7)
    out["below_7"] = {str(n): [g.below(n) for _ in range(6)] for n in (1, 2, 3, 10, 1000, 2**63 + 5)}
    g = Xoshiro(9)
    out["unit_9"] = [g.unit() for _ in range(6)]
    out["stream_5_3"] = [str(v) for v in (lambda g: [g.next() for _ in range(4)])(Xoshiro.stream(5, 3))]

    x = [((i * 37) % 29) / 7.0 for i in range(25)]
    y = [0.5 * x[i] + ((i * 13) % 11) / 3.0 for i in range(25)]
    rs, redraws = bootstrap(x, y, 100, 20, 2024)
    out["bootstrap"] = {"x": x, "y": y, "n_boot": 100, "sample_size": 20, "seed": 2024,
                        "r_full": pearson(x, y), "bootstrap_r": rs, "redraws": redraws}

    # Small ties-heavy set that forces degenerate resamples.
    bx = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
    by = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]
    rs, redraws = bootstrap(bx, by, 40, 6, 11)
    out["bootstrap_redraw"] = {"x": bx, "y": by, "n_boot": 40, "sample_size": 6, "seed": 11,
                               "bootstrap_r": rs, "redraws": redraws}
    return out


def nifti_fixture():
    rng = np.random.default_rng(1234)
    arr = rng.random((5, 4, 3)).astype(np.float32)
    arr[0, 0, 0] = 0.0
    arr[4, 3, 2] = 1.0
    img = nib.Nifti1Image(arr, np.diag([0.8, 0.9, 2.5, 1.0]))
    img.header.set_zooms((0.8, 0.9, 2.5))
    nib.save(img, OUT / "nibabel_prob.nii.gz")

    labels = np.zeros((6, 5, 4), dtype=np.uint8)
    labels[1:3, 1:3, 1:3] = 1
    labels[4, 4, 3] = 1
    nib.save(nib.Nifti1Image(labels, np.diag([0.5, 0.5, 1.0, 1.0])), OUT / "nibabel_mask.nii")

    ref = {
        "prob": {"dims": list(arr.shape), "spacing": [0.8, 0.9, 2.5],
                 "values": [float(v) for v in arr.flatten(order="F")]},
        "mask": {"dims": list(labels.shape), "spacing": [0.5, 0.5, 1.0],
                 "values": [int(v) for v in labels.flatten(order="F")]},
    }
    (OUT / "nibabel_reference.json").write_text(json.dumps(ref))


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    (OUT / "rng_reference.json").write_text(json.dumps(rng_reference(), indent=1))
    nifti_fixture()
