"""Reference embeddings, distances, augmentations and calibration computed with numpy."""

import json
import pathlib

import numpy as np
from PIL import Image

ROOT = pathlib.Path(__file__).resolve().parents[1] / "fixtures"
VISUAL = ROOT / "visual"
GOLDEN = ROOT / "golden"


def load(path):
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)


def luma(img):
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def area_matrix(n_in, n_out):
    """Row j averages source samples over [j*s, (j+1)*s), s = n_in / n_out."""
    s = n_in / n_out
    m = np.zeros((n_out, n_in))
    for j in range(n_out):
        lo, hi = j * s, (j + 1) * s
        for x in range(int(np.floor(lo)), int(np.ceil(hi))):
            m[j, x] = max(0.0, min(x + 1, hi) - max(x, lo))
    return m / s


def resize(gray, n):
    h, w = gray.shape
    return area_matrix(h, n) @ gray @ area_matrix(w, n).T


def centred(img, n):
    g = resize(luma(img), n)
    g = g - g.mean()
    if (g ** 2).mean() < 1.0:
        raise ValueError("degenerate")
    return g


def embed_baseline(img):
    g = centred(img, 32).ravel()
    return g / np.linalg.norm(g)


def embed_spectral(img, n=64, kf=24, power=0.35):
    g = centred(img, n)
    w = np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * (np.arange(n) + 0.5) / n))
    f = np.abs(np.fft.fft2(g * np.outer(w, w)))
    vals = [f[0, u] for u in range(kf + 1)]
    for v in range(1, kf + 1):
        vals.extend(f[v, u % n] for u in range(-kf, kf + 1))
    e = np.asarray(vals) ** power
    return e / np.linalg.norm(e)


EMBEDDERS = {"baseline-gray32-v1": embed_baseline, "spectral-dft64-v1": embed_spectral}


def shift(img, dx, dy):
    h, w, _ = img.shape
    out = np.full_like(img, 255.0)
    ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
    xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
    out[yd, xd] = img[ys, xs]
    return out


def scale(img, f):
    return np.minimum(255.0, img * f)


def noise(img, sigma, rng):
    return np.clip(img + rng.normal(0.0, sigma, img.shape), 0.0, 255.0)


def variants(img, rng):
    h, w, _ = img.shape
    dx, dy = round(0.05 * w), round(0.05 * h)
    out = [shift(img, sx * dx, sy * dy) for sx, sy in ((-1, -1), (1, -1), (-1, 1), (1, 1))]
    out += [scale(img, f) for f in (1.2, 1.4, 0.8, 0.6)]
    out += [noise(img, s, rng) for s in (5.0, 10.0)]
    return out


def best_threshold(pos, neg):
    """F1-maximising cut for `d < t`, midpoints between distinct distances."""
    d = np.concatenate([pos, neg])
    lab = np.concatenate([np.ones(len(pos), bool), np.zeros(len(neg), bool)])
    order = np.argsort(d, kind="stable")
    d, lab = d[order], lab[order]
    tp = np.cumsum(lab)
    fp = np.cumsum(~lab)
    best = None
    for i in range(len(d)):
        if i + 1 < len(d) and d[i + 1] == d[i]:
            continue
        t = 0.5 * (d[i] + d[i + 1]) if i + 1 < len(d) else d[i] + 1e-9
        p = tp[i] / (tp[i] + fp[i])
        r = tp[i] / len(pos)
        f1 = 0.0 if tp[i] == 0 else 2 * p * r / (p + r)
        if best is None or f1 > best[0]:
            best = (f1, t, p, r)
    return {"threshold": best[1], "precision": best[2], "recall": best[3], "f1": best[0],
            "max_positive": float(pos.max()), "min_negative": float(neg.min()),
            "positives": len(pos), "negatives": len(neg)}


def calibrate(embed, logged, unlogged, rng):
    orig = [embed(load(VISUAL / f"{d}.png")) for d in logged]
    var = [[embed(v) for v in variants(load(VISUAL / f"{d}.png"), rng)] for d in logged]
    foreign = [embed(load(VISUAL / f"{d}.png")) for d in unlogged]
    dist = lambda a, b: float(np.linalg.norm(a - b))  # noqa: E731
    pos, neg = [], []
    for i, o in enumerate(orig):
        pos += [dist(v, o) for v in var[i]]
        neg += [dist(f, o) for f in foreign]
        for j in range(len(orig)):
            if j == i:
                continue
            if j > i:
                neg.append(dist(o, orig[j]))
            neg += [dist(v, o) for v in var[j]]
    return best_threshold(np.asarray(pos), np.asarray(neg))


def main():
    manifest = json.loads((VISUAL / "manifest.json").read_text())
    a = load(VISUAL / "bluebank.test.png")
    b = load(VISUAL / "mailbox.test.png")

    golden = {"image": "visual/bluebank.test.png", "other": "visual/mailbox.test.png"}
    for name, embed in EMBEDDERS.items():
        ea, eb = embed(a), embed(b)
        golden[name] = {
            "embedding": ea.tolist(),
            "distance_to_other": float(np.linalg.norm(ea - eb)),
            "distance_to_darken_0.8": float(np.linalg.norm(ea - embed(scale(a, 0.8)))),
        }
    (GOLDEN / "visual_embeddings.json").write_text(json.dumps(golden) + "\n")

    login = load(ROOT / "demo_site" / "login.png")
    Image.fromarray(shift(login, -200, 50).astype(np.uint8)).save(GOLDEN / "login_shift_m200_50.png")

    results = {}
    for name, embed in EMBEDDERS.items():
        rng = np.random.default_rng(20240601)
        results[name] = calibrate(embed, manifest["logged"], manifest["unlogged"], rng)
    (GOLDEN / "calibration.json").write_text(json.dumps(results, indent=2) + "\n")


if __name__ == "__main__":
    main()
