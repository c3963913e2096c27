"""Reference implementations the tests check the package against.

Each one takes the slow, obvious route and shares no code with swipecf.
"""
import math
from fractions import Fraction

import numpy as np


def dense_cosine(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = math.sqrt(float(np.sum(a * a)))
    nb = math.sqrt(float(np.sum(b * b)))
    if na == 0 or nb == 0:
        return 0.0
    return float(np.sum(a * b)) / (na * nb)


def exhaustive_neighbors(raids_by_user, target, k, min_similarity=0.0):
    """All-pairs scan; ranks by exact cosine, then overlap, then user id."""
    mine = raids_by_user[target]
    rows = []
    for user, theirs in raids_by_user.items():
        if user == target or not mine or not theirs:
            continue
        overlap = len(mine & theirs)
        exact_sq = Fraction(overlap * overlap, len(mine) * len(theirs))
        score = overlap / math.sqrt(len(mine) * len(theirs))
        if score > min_similarity:
            rows.append((-exact_sq, -overlap, user, score))
    rows.sort()
    return [(user, score, -neg_ov) for _, neg_ov, user, score in rows[:k]]


def levenshtein(a, b):
    """Full-table dynamic programming edit distance."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        table[i][0] = i
    for j in range(len(b) + 1):
        table[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return table[len(a)][len(b)]


def levenshtein_bitparallel(a, b):
    """Myers/Hyyro bit-vector edit distance; fast enough for all-pairs scans."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    peq = {}
    for i, c in enumerate(a):
        peq[c] = peq.get(c, 0) | (1 << i)
    m = len(a)
    mask = (1 << m) - 1
    last = 1 << (m - 1)
    pv, mv, score = mask, 0, m
    for c in b:
        eq = peq.get(c, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & mask)
        mh = pv & xh
        if ph & last:
            score += 1
        elif mh & last:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        mh = (mh << 1) & mask
        pv = mh | (~(xv | ph) & mask)
        mv = ph & xv
    return score


def normalized(title):
    return " ".join(title.lower().split())


def brute_force_clusters(products, threshold, distance=levenshtein_bitparallel):
    """Compare every pair, union the qualifying ones, label by smallest id."""
    ids = [p.product_id for p in products]
    titles = [normalized(p.title) for p in products]
    parent = list(range(len(ids)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            m = max(len(titles[i]), len(titles[j]))
            sim = 1.0 if m == 0 else 1.0 - distance(titles[i], titles[j]) / m
            if sim > threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups = {}
    for i in range(len(ids)):
        groups.setdefault(find(i), []).append(ids[i])
    out = {}
    for members in groups.values():
        canon = min(members)
        for m in members:
            out[m] = canon
    return out


def matrix_cells_by_scan(events):
    """For every (user, product) pair, rescan the whole log for its winning swipe."""
    pairs = {(e.user_id, e.product_id) for e in events}
    out = {}
    for pair in pairs:
        best = None
        for e in events:
            if (e.user_id, e.product_id) != pair:
                continue
            if best is None or e.timestamp > best.timestamp or (
                e.timestamp == best.timestamp and e.event_id > best.event_id
            ):
                best = e
        out[pair] = best.direction.value
    return out
