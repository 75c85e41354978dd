"""Independent reference implementations used as test oracles.

Everything here is written from the definitions in the most literal way
possible (scalar loops, LP solvers, direct DFT sums) and shares no code
with the package internals. Where a convention must match the library to
be comparable at all (LBP's lerp-form interpolation and tie handling),
the convention is restated here in scalar form.
"""
import math

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import cityblock, euclidean
from scipy.spatial.distance import correlation as sp_correlation
from scipy.spatial.distance import cosine as sp_cosine
from scipy.stats import wasserstein_distance


def naive_bilinear(img, y, x):
    """Scalar lerp-form bilinear sample with integer snapping."""
    if abs(y - round(y)) < 1e-9:
        y = float(round(y))
    if abs(x - round(x)) < 1e-9:
        x = float(round(x))
    y0, x0 = math.floor(y), math.floor(x)
    ty, tx = y - y0, x - x0
    if ty == 0.0 and tx == 0.0:
        return img[y0, x0]
    if ty == 0.0:
        a, b = img[y0, x0], img[y0, x0 + 1]
        return a + tx * (b - a)
    if tx == 0.0:
        a, c = img[y0, x0], img[y0 + 1, x0]
        return a + ty * (c - a)
    a, b = img[y0, x0], img[y0, x0 + 1]
    c, d = img[y0 + 1, x0], img[y0 + 1, x0 + 1]
    top = a + tx * (b - a)
    bot = c + tx * (d - c)
    return top + ty * (bot - top)


def naive_lbp_hist(img, radius, neighbors):
    """Loop-based rotation-invariant-uniform LBP over interior pixels."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    hist = np.zeros(neighbors + 2)
    for i in range(radius, h - radius):
        for j in range(radius, w - radius):
            center = img[i, j]
            bits = []
            for k in range(neighbors):
                theta = 2.0 * math.pi * k / neighbors
                val = naive_bilinear(img, i - radius * math.sin(theta), j + radius * math.cos(theta))
                bits.append(1 if val >= center else 0)
            transitions = sum(bits[k] != bits[(k + 1) % neighbors] for k in range(neighbors))
            code = sum(bits) if transitions <= 2 else neighbors + 1
            hist[code] += 1
    return hist / hist.sum()


def naive_window_profiles(window):
    """Length-normalised line profiles of one window (0, 45, 90, 135 deg)."""
    w = window.shape[0]
    half = (w - 1) // 2
    p0 = [float(np.mean(window[:, c])) for c in range(w)]
    p90 = [float(np.mean(window[r, :])) for r in range(w)]
    p45 = [float(np.mean(np.diag(window, k=o))) for o in range(-half, half + 1)]
    p135 = [float(np.mean(np.diag(window[:, ::-1], k=o))) for o in range(-half, half + 1)]
    return [p0, p45, p90, p135]


def _profile_code(profile):
    bits = [1 if profile[i + 1] - profile[i] >= 0 else 0 for i in range(len(profile) - 1)]
    code = 0
    for b in bits:
        code = code * 2 + b
    return code


def naive_elp(img, window, stride):
    """Loop-based ELP histogram: one 2**(w-1)-bin block per direction."""
    img = np.asarray(img, dtype=float)
    n_bins = 2 ** (window - 1)
    hists = [np.zeros(n_bins) for _ in range(4)]
    for r in range(0, img.shape[0] - window + 1, stride):
        for c in range(0, img.shape[1] - window + 1, stride):
            win = img[r : r + window, c : c + window]
            for d, profile in enumerate(naive_window_profiles(win)):
                hists[d][_profile_code(profile)] += 1
    return np.concatenate([h / h.sum() if h.sum() > 0 else h for h in hists])


def direct_dft_magnitudes(profile, n_bins):
    """|X_k| for k = 1..n_bins by the plain DFT sum."""
    w = len(profile)
    out = []
    for k in range(1, n_bins + 1):
        if k > w - 1:
            out.append(0.0)
            continue
        acc = 0.0 + 0.0j
        for n, v in enumerate(profile):
            acc += v * np.exp(-2j * math.pi * k * n / w)
        out.append(abs(acc))
    return np.array(out)


def naive_felp(img, window, stride, n_bins=8):
    """Loop-based F-ELP: window-averaged direct-DFT magnitudes."""
    img = np.asarray(img, dtype=float)
    sums = [np.zeros(n_bins) for _ in range(4)]
    count = 0
    for r in range(0, img.shape[0] - window + 1, stride):
        for c in range(0, img.shape[1] - window + 1, stride):
            win = img[r : r + window, c : c + window]
            for d, profile in enumerate(naive_window_profiles(win)):
                sums[d] += direct_dft_magnitudes(profile, n_bins)
            count += 1
    feats = np.concatenate([s / count for s in sums])
    norm = math.sqrt(float((feats**2).sum()))
    return feats / norm if norm > 0 else feats


def lp_transport_distance(p, q):
    """Minimum-cost transport between unit-mass histograms on the integer
    line, solved as an explicit LP."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p = p / p.sum()
    q = q / q.sum()
    n = p.size
    cost = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float).ravel()
    a_eq = np.zeros((2 * n, n * n))
    for i in range(n):
        a_eq[i, i * n : (i + 1) * n] = 1.0  # mass leaving bin i
    for j in range(n):
        a_eq[n + j, j::n] = 1.0  # mass arriving at bin j
    res = linprog(cost, A_eq=a_eq, b_eq=np.concatenate([p, q]), bounds=(0, None), method="highs")
    assert res.success, res.message
    return float(res.fun)


def _chi2(p, q):
    return float(0.5 * (((p - q) ** 2) / (p + q + 1e-10)).sum())


def _hutchinson_cdf(p, q):
    # scipy's CDF-based 1-D Wasserstein on integer bin positions
    n = len(p)
    return float(wasserstein_distance(np.arange(n), np.arange(n), p, q))


def oracle_distance(kind_token, p, q):
    """Reference distances; returns NaN where the distance is undefined."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if kind_token == "l1":
        return float(cityblock(p, q))
    if kind_token == "l2":
        return float(euclidean(p, q))
    if kind_token == "cosine":
        if np.sqrt((p * p).sum()) == 0 or np.sqrt((q * q).sum()) == 0:
            return float("nan")
        return float(sp_cosine(p, q))
    if kind_token == "correlation":
        if np.all(p == p[0]) or np.all(q == q[0]):
            return float("nan")
        return float(sp_correlation(p, q))
    if kind_token == "chi2":
        return _chi2(p, q)
    if kind_token == "hutchinson":
        if p.sum() <= 0 or q.sum() <= 0:
            return float("nan")
        return _hutchinson_cdf(p, q)
    raise ValueError(kind_token)


def exhaustive_knn(vectors, probe, k, kind_token):
    """Sort every defined pairing by (distance, index) and take k."""
    scored = []
    for idx, v in enumerate(vectors):
        d = oracle_distance(kind_token, probe, v)
        if not math.isnan(d):
            scored.append((d, idx))
    scored.sort(key=lambda t: (t[0], t[1]))
    return scored[:k]


def recount_confusion(preds, truths):
    tp = sum(1 for p, t in zip(preds, truths) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(preds, truths) if p == 1 and t == 0)
    tn = sum(1 for p, t in zip(preds, truths) if p == 0 and t == 0)
    fn = sum(1 for p, t in zip(preds, truths) if p == 0 and t == 1)
    return tp, fp, tn, fn


def recount_bac(tp, fp, tn, fn):
    return 0.5 * (tp / (tp + fn) + tn / (tn + fp))


def recount_f1(tp, fp, tn, fn):
    if tp == 0:
        return 0.0
    pr = tp / (tp + fp)
    rc = tp / (tp + fn)
    return 2 * pr * rc / (pr + rc)
