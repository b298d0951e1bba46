"""Naive reference implementations used to cross-check the package.

Everything here is deliberately slow and literal: per-bit loops, full
enumeration, float arithmetic, Python-level sorting. Nothing imports the
implementation's fast paths beyond the shared loss formulas.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------- losses

def direct_pair_loss(tag: str, m: int, s: int, y: float, lam: float = 100.0) -> float:
    """Literal per-pair loss formulas, written independently of the package."""
    d_h = (m - s) / 2.0
    if tag == "ksh":
        return float((s - m * y) ** 2)
    if tag == "bre":
        yprime = 0.0 if y > 0 else 1.0
        return float((d_h / m - yprime) ** 2)
    if tag == "splh":
        return float(math.exp(-y * s / m))
    if tag == "ee":
        if y > 0:
            return float(d_h)
        return float(lam * math.exp(-d_h / m))
    if tag == "exph":
        shift = m if y < 0 else 0.0
        return float(math.exp((y * d_h + shift) / m))
    raise ValueError(tag)


def total_objective(tag: str, m: int, bits: np.ndarray, pairs, lam: float = 100.0) -> float:
    """Doubled sum of pair losses over stored unordered pairs (i<j)."""
    total = 0.0
    for (a, b, y) in pairs:
        s = int(np.dot(bits[a].astype(int), bits[b].astype(int)))
        total += direct_pair_loss(tag, m, s, y, lam)
    return 2.0 * total


# ------------------------------------------------------------------ bqp

def bqp_objective(a_dense: np.ndarray, z: np.ndarray) -> float:
    return float(z.astype(float) @ a_dense @ z.astype(float))


def brute_force_bqp(a_dense: np.ndarray) -> tuple[float, np.ndarray]:
    """Exhaustive minimum of z'Az over all sign vectors (first minimizer)."""
    n = a_dense.shape[0]
    best_val, best_z = math.inf, None
    for combo in itertools.product((-1, 1), repeat=n):
        z = np.array(combo, dtype=float)
        val = bqp_objective(a_dense, z)
        if val < best_val:
            best_val, best_z = val, np.array(combo, dtype=np.int8)
    return best_val, best_z


# ------------------------------------------------------------ retrieval

def naive_hamming(bits_a: np.ndarray, bits_b: np.ndarray) -> int:
    """Per-position loop over 0/1 bit vectors."""
    assert len(bits_a) == len(bits_b)
    d = 0
    for x, v in zip(bits_a, bits_b):
        if int(x) != int(v):
            d += 1
    return d


def naive_rank(db_bits: np.ndarray, db_ids, query_bits: np.ndarray):
    """Full stable sort by (float distance, id)."""
    rows = []
    for row, rid in enumerate(db_ids):
        rows.append((float(naive_hamming(db_bits[row], query_bits)), int(rid)))
    return sorted(rows, key=lambda item: (item[0], item[1]))


def naive_metrics(db_bits, db_ids, query_bits_list, relevant_sets, k, radius, m):
    """The four retrieval metrics, computed by definition with loops."""
    aps, pks, r2s = [], [], []
    prec_rows, rec_rows = [], []
    for qbits, relset in zip(query_bits_list, relevant_sets):
        ranking = naive_rank(db_bits, db_ids, qbits)
        within = [(dist, rid) for dist, rid in ranking if dist <= radius]
        if within:
            r2s.append(sum(1 for _, rid in within if rid in relset) / len(within))
        else:
            r2s.append(0.0)
        if not relset:
            continue
        hits = 0
        precisions = []
        for pos, (dist, rid) in enumerate(ranking, start=1):
            if rid in relset:
                hits += 1
                precisions.append(hits / pos)
        aps.append(sum(precisions) / len(relset))
        topk = ranking[:k]
        pks.append(sum(1 for _, rid in topk if rid in relset) / k)
        ret_by_dist = [0] * (m + 1)
        rel_by_dist = [0] * (m + 1)
        for dist, rid in ranking:
            ret_by_dist[int(dist)] += 1
            if rid in relset:
                rel_by_dist[int(dist)] += 1
        prec_t, rec_t = [], []
        ret_cum = rel_cum = 0
        for thr in range(m + 1):
            ret_cum += ret_by_dist[thr]
            rel_cum += rel_by_dist[thr]
            prec_t.append(rel_cum / ret_cum if ret_cum else 0.0)
            rec_t.append(rel_cum / len(relset))
        prec_rows.append(prec_t)
        rec_rows.append(rec_t)
    if not aps:
        raise ValueError("all relevant sets empty")
    prec_curve = [sum(col) / len(col) for col in zip(*prec_rows)]
    rec_curve = [sum(col) / len(col) for col in zip(*rec_rows)]
    auc = 0.0
    for t in range(1, m + 1):
        auc += 0.5 * (prec_curve[t] + prec_curve[t - 1]) * (rec_curve[t] - rec_curve[t - 1])
    return {
        "precision_at_k": sum(pks) / len(pks),
        "map": sum(aps) / len(aps),
        "pr_auc": auc,
        "prec_within_r2": sum(r2s) / len(r2s),
        "pr_precision": prec_curve,
        "pr_recall": rec_curve,
    }
