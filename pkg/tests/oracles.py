"""Deliberately naive reference implementations for metric cross-checks."""

import math

from mqmqe.corpus import BAD


def ranks(values):
    # rank = 1 + #smaller + (#equal - 1) / 2
    return [1 + sum(v < x for v in values) + (sum(v == x for v in values) - 1) / 2 for x in values]


def spearman(a, b):
    ra, rb = ranks(a), ranks(b)
    n = len(a)
    ma, mb = sum(ra) / n, sum(rb) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = sum((x - ma) ** 2 for x in ra)
    vb = sum((y - mb) ** 2 for y in rb)
    return cov / math.sqrt(va * vb)


def mcc(pred, gold):
    pairs = [(p, g) for ps, gs in zip(pred, gold) for p, g in zip(ps, gs)]
    tp = sum(p == BAD and g == BAD for p, g in pairs)
    tn = sum(p != BAD and g != BAD for p, g in pairs)
    fp = sum(p == BAD and g != BAD for p, g in pairs)
    fn = sum(p != BAD and g == BAD for p, g in pairs)
    d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return 0.0 if d == 0 else (tp * tn - fp * fn) / math.sqrt(d)


def span_f1(pred, gold, lenient):
    score = 0.0
    n_pred = n_gold = 0
    for ps, gs in zip(pred, gold):
        pc = {(c, s.severity) for s in ps for c in range(s.start, s.end)}
        gc = {(c, s.severity) for s in gs for c in range(s.start, s.end)}
        gpos = {c for c, _ in gc}
        n_pred += len(pc)
        n_gold += len(gc)
        for c, sev in pc:
            if (c, sev) in gc:
                score += 1
            elif lenient and c in gpos:
                score += 0.5
    if n_pred == 0 and n_gold == 0:
        return 1.0
    if n_pred == 0 or n_gold == 0:
        return 0.0
    p, r = score / n_pred, score / n_gold
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)
