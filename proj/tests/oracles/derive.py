"""Independent reference values frozen into the C++ unit tests.

Run with python3; every printed constant is pasted into the matching test.
Uses only exact rationals or plain float64 loops, never the C++ code.
"""
from fractions import Fraction
import math


def lstm_cell():
    C, H = 2, 3
    W = [[0.05 * (((3 * c + 5 * j) % 13) - 6) for j in range(4 * H)] for c in range(C)]
    U = [[0.04 * (((7 * k + 2 * j) % 11) - 5) for j in range(4 * H)] for k in range(H)]
    b = [0.03 * ((j % 7) - 3) for j in range(4 * H)]
    x = [0.5, -1.2]
    h = [0.1, -0.2, 0.3]
    c = [0.4, -0.5, 0.6]
    z = []
    for j in range(4 * H):
        s = b[j]
        for k in range(C):
            s += x[k] * W[k][j]
        for k in range(H):
            s += h[k] * U[k][j]
        z.append(s)
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    f = [sig(z[u]) for u in range(H)]
    i = [sig(z[H + u]) for u in range(H)]
    o = [sig(z[2 * H + u]) for u in range(H)]
    g = [math.tanh(z[3 * H + u]) for u in range(H)]
    c2 = [f[u] * c[u] + i[u] * g[u] for u in range(H)]
    h2 = [o[u] * math.tanh(c2[u]) for u in range(H)]
    print("lstm h'", [repr(v) for v in h2])
    print("lstm c'", [repr(v) for v in c2])


def adam_trace():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    theta, m, v = 1.0, 0.0, 0.0
    out = []
    for t, g in enumerate([0.5, -0.3, 0.2], start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        theta = theta - lr * mh / (math.sqrt(vh) + eps)
        out.append(theta)
    print("adam", [repr(v) for v in out])


def sample_var(col):
    n = len(col)
    mean = sum(col) / n
    return sum((x - mean) ** 2 for x in col) / (n - 1)


def cronbach():
    rows = [[1, 3, 2], [4, 2, 5], [3, 4, 3], [5, 5, 4]]
    k = 3
    cols = [[Fraction(r[j]) for r in rows] for j in range(k)]
    totals = [Fraction(sum(r)) for r in rows]
    item = sum(sample_var(c) for c in cols)
    total = sample_var(totals)
    alpha = Fraction(k, k - 1) * (1 - item / total)
    print("alpha 4x3", alpha, repr(float(alpha)), "item vars", [str(sample_var(c)) for c in cols], "total var", total)


def construct_mixed():
    responses = [5, 2, 4, 1, 3, 4, 2, 5, 3, 1]
    reverse = [False, True, False, True, False, False, True, False, False, True]
    adj = [Fraction(6 - r) if rv else Fraction(r) for r, rv in zip(responses, reverse)]
    mean = sum(adj) / len(adj)
    print("construct 10-item", mean, repr(float(mean)))
    sus = [4, 2, 5, 1, 3, 2, 4, 3, 5, 1]
    score = sum((r - 1) if i % 2 == 0 else (5 - r) for i, r in enumerate(sus)) * 2.5
    print("sus", score)


def auc_pairs():
    # 20-sample case shared with the metrics test.
    scores = [((7 * i) % 11) / 10 for i in range(20)]
    truth = [1 if (i * 5) % 3 == 0 else 0 for i in range(20)]
    pos = [s for s, t in zip(scores, truth) if t]
    neg = [s for s, t in zip(scores, truth) if not t]
    num = Fraction(0)
    for p in pos:
        for q in neg:
            num += 1 if p > q else (Fraction(1, 2) if p == q else 0)
    auc = num / (len(pos) * len(neg))
    print("auc 20", auc, repr(float(auc)))


if __name__ == "__main__":
    lstm_cell()
    adam_trace()
    cronbach()
    construct_mixed()
    auc_pairs()
