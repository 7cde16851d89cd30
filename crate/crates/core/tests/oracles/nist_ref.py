"""Independent NIST SP 800-22 reference (numpy/scipy), used to freeze the
p-values asserted in tests/nist_reference.rs.

Input: 125000 bytes = SHA-256(b"nist-oracle" || be32(i)) for i = 0, 1, ...
unpacked most-significant bit first (10^6 bits).
"""
import hashlib
import math
import sys

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm


def oracle_bytes(n):
    out = b""
    i = 0
    while len(out) < n:
        out += hashlib.sha256(b"nist-oracle" + i.to_bytes(4, "big")).digest()
        i += 1
    return out[:n]


def unpack(b):
    return np.unpackbits(np.frombuffer(b, dtype=np.uint8)).astype(np.int64)


def frequency(e):
    n = len(e)
    s = np.sum(2 * e - 1)
    return [erfc(abs(s) / math.sqrt(n) / math.sqrt(2))]


def block_frequency(e, M):
    N = len(e) // M
    blocks = e[: N * M].reshape(N, M)
    pi = blocks.sum(axis=1) / M
    chi = 4 * M * np.sum((pi - 0.5) ** 2)
    return [gammaincc(N / 2, chi / 2)]


def runs(e):
    n = len(e)
    pi = e.mean()
    if abs(pi - 0.5) > 2 / math.sqrt(n):
        return [0.0]
    v = 1 + np.count_nonzero(e[1:] != e[:-1])
    return [erfc(abs(v - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))]


def longest_run(e):
    n = len(e)
    if n < 6272:
        M, lo, hi, pi = 8, 1, 4, [0.2148, 0.3672, 0.2305, 0.1875]
    elif n < 750000:
        M, lo, hi, pi = 128, 4, 9, [0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124]
    else:
        M, lo, hi, pi = 10000, 10, 16, [0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727]
    N = n // M
    nu = [0] * len(pi)
    for b in range(N):
        s = "".join(map(str, e[b * M:(b + 1) * M]))
        longest = max((len(r) for r in s.split("0")), default=0)
        nu[min(max(longest, lo), hi) - lo] += 1
    chi = sum((nu[i] - N * pi[i]) ** 2 / (N * pi[i]) for i in range(len(pi)))
    return [gammaincc((len(pi) - 1) / 2, chi / 2)]


def gf2_rank(mat):
    m = mat.copy()
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = None
        for r in range(rank, rows):
            if m[r, c]:
                piv = r
                break
        if piv is None:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def rank_test(e):
    N = len(e) // 1024
    f = [0, 0, 0]
    for k in range(N):
        r = gf2_rank(e[k * 1024:(k + 1) * 1024].reshape(32, 32).astype(np.uint8))
        f[0 if r == 32 else 1 if r == 31 else 2] += 1

    def prob(r, m=32, q=32):
        p = 2.0 ** (r * (q + m - r) - m * q)
        for i in range(r):
            p *= (1 - 2.0 ** (i - q)) * (1 - 2.0 ** (i - m)) / (1 - 2.0 ** (i - r))
        return p
    pr = [prob(32), prob(31)]
    pr.append(1 - pr[0] - pr[1])
    chi = sum((f[i] - N * pr[i]) ** 2 / (N * pr[i]) for i in range(3))
    return [math.exp(-chi / 2)]


def dft(e):
    n = len(e)
    x = 2 * e - 1
    mod = np.abs(np.fft.fft(x))[: n // 2]
    t = math.sqrt(math.log(1 / 0.05) * n)
    n0 = 0.95 * n / 2
    n1 = np.count_nonzero(mod < t)
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4)
    return [erfc(abs(d) / math.sqrt(2))]


def templates(m):
    out = []
    for t in range(1 << m):
        s = format(t, "0%db" % m)
        if all(s[:m - k] != s[k:] for k in range(1, m)):
            out.append(s)
    return out


def non_overlapping(e, m=9):
    n = len(e)
    N = 8
    M = n // N
    lam = (M - m + 1) / 2 ** m
    var = M * (1 / 2 ** m - (2 * m - 1) / 2 ** (2 * m))
    s = "".join(map(str, e))
    ps = []
    for tpl in templates(m):
        chi = 0.0
        for i in range(N):
            block = s[i * M:(i + 1) * M]
            # str.count counts non-overlapping occurrences scanning left to right
            w = block.count(tpl)
            chi += (w - lam) ** 2 / var
        ps.append(gammaincc(N / 2, chi / 2))
    return ps


def overlapping(e, m=9, M=1032):
    n = len(e)
    N = n // M
    pi = [0.364091, 0.185659, 0.139381, 0.100571, 0.0704323, 0.139865]
    tpl = "1" * m
    s = "".join(map(str, e))
    nu = [0] * 6
    for i in range(N):
        block = s[i * M:(i + 1) * M]
        c = sum(1 for j in range(M - m + 1) if block.startswith(tpl, j))
        nu[min(c, 5)] += 1
    chi = sum((nu[i] - N * pi[i]) ** 2 / (N * pi[i]) for i in range(6))
    return [gammaincc(5 / 2, chi / 2)]


def universal(e, L=7, Q=1280):
    ev = {6: 5.2177052, 7: 6.1962507, 8: 7.1836656}
    va = {6: 2.954, 7: 3.125, 8: 3.238}
    n = len(e)
    K = n // L - Q
    weights = 1 << np.arange(L - 1, -1, -1)
    vals = (e[: (Q + K) * L].reshape(Q + K, L) * weights).sum(axis=1)
    table = {}
    for i in range(Q):
        table[vals[i]] = i + 1
    total = 0.0
    for i in range(Q, Q + K):
        total += math.log2(i + 1 - table.get(vals[i], 0))
        table[vals[i]] = i + 1
    fn = total / K
    c = 0.7 - 0.8 / L + (4 + 32 / L) * K ** (-3 / L) / 15
    sigma = c * math.sqrt(va[L] / K)
    return [erfc(abs(fn - ev[L]) / (math.sqrt(2) * sigma))]


def bm(s):
    n = len(s)
    c = [0] * (n + 1); b = [0] * (n + 1)
    c[0] = b[0] = 1
    L, m = 0, -1
    for i in range(n):
        d = s[i]
        for j in range(1, L + 1):
            d ^= c[j] & s[i - j]
        if d:
            t = c[:]
            for j in range(0, n + 1 - (i - m)):
                c[j + i - m] ^= b[j]
            if L <= i // 2:
                L, m, b = i + 1 - L, i, t
    return L


def linear_complexity(e, M=500):
    n = len(e)
    N = n // M
    mu = M / 2 + (9 + (-1) ** (M + 1)) / 36 - (M / 3 + 2 / 9) / 2 ** M
    pi = [0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833]
    nu = [0] * 7
    for i in range(N):
        L = bm([int(v) for v in e[i * M:(i + 1) * M]])
        t = (-1) ** M * (L - mu) + 2 / 9
        edges = [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]
        k = next((j for j, ed in enumerate(edges) if t <= ed), 6)
        nu[k] += 1
    chi = sum((nu[i] - N * pi[i]) ** 2 / (N * pi[i]) for i in range(7))
    return [gammaincc(3, chi / 2)]


def cyclic_counts(e, m):
    n = len(e)
    ext = np.concatenate([e, e[: m - 1]])
    v = np.zeros(n, dtype=np.int64)
    for k in range(m):
        v = (v << 1) | ext[k:k + n]
    return np.bincount(v, minlength=1 << m)


def psi2(e, m):
    if m <= 0:
        return 0.0
    n = len(e)
    c = cyclic_counts(e, m).astype(np.float64)
    return (2 ** m / n) * np.sum(c * c) - n


def serial(e, m=16):
    a, b, c = psi2(e, m), psi2(e, m - 1), psi2(e, m - 2)
    return [gammaincc(2 ** (m - 2), (a - b) / 2), gammaincc(2 ** (m - 3), (a - 2 * b + c) / 2)]


def apen(e, m=10):
    n = len(e)

    def phi(mm):
        c = cyclic_counts(e, mm)
        c = c[c > 0] / n
        return float(np.sum(c * np.log(c)))
    ap = phi(m) - phi(m + 1)
    return [gammaincc(2 ** (m - 1), n * (math.log(2) - ap))]


def cusum(e, forward=True):
    n = len(e)
    x = 2 * e - 1
    if not forward:
        x = x[::-1]
    z = int(np.max(np.abs(np.cumsum(x))))
    def trunc(a, b):
        return int(a / b)  # C-style division toward zero
    s1 = sum(norm.cdf((4 * k + 1) * z / math.sqrt(n)) - norm.cdf((4 * k - 1) * z / math.sqrt(n))
             for k in range(trunc(trunc(-n, z) + 1, 4), trunc(trunc(n, z) - 1, 4) + 1))
    s2 = sum(norm.cdf((4 * k + 3) * z / math.sqrt(n)) - norm.cdf((4 * k + 1) * z / math.sqrt(n))
             for k in range(trunc(trunc(-n, z) - 3, 4), trunc(trunc(n, z) - 1, 4) + 1))
    return [1 - s1 + s2]


def excursions(e):
    x = 2 * e - 1
    s = np.cumsum(x)
    zeros = np.flatnonzero(s == 0)
    ends = list(zeros + 1)
    if s[-1] != 0:
        ends.append(len(s))
    J = len(ends)
    if J < 500:
        return None, None
    ps = []
    start = 0
    visits = {st: [] for st in [-4, -3, -2, -1, 1, 2, 3, 4]}
    for end in ends:
        seg = s[start:end]
        for st in visits:
            visits[st].append(int(np.count_nonzero(seg == st)))
        start = end
    for st in [-4, -3, -2, -1, 1, 2, 3, 4]:
        a = 1 / (2 * abs(st))
        pi = [1 - a] + [a * a * (1 - a) ** (k - 1) for k in range(1, 5)] + [a * (1 - a) ** 4]
        nu = [0] * 6
        for v in visits[st]:
            nu[min(v, 5)] += 1
        chi = sum((nu[k] - J * pi[k]) ** 2 / (J * pi[k]) for k in range(6))
        ps.append(gammaincc(2.5, chi / 2))
    var = []
    for st in [x for x in range(-9, 10) if x != 0]:
        xi = int(np.count_nonzero(s == st))
        var.append(erfc(abs(xi - J) / math.sqrt(2 * J * (4 * abs(st) - 2))))
    return ps, var, J


if __name__ == "__main__":
    e = unpack(oracle_bytes(125000))
    res = {
        "frequency": frequency(e),
        "block_frequency": block_frequency(e, 128),
        "runs": runs(e),
        "longest_run": longest_run(e),
        "rank": rank_test(e),
        "dft": dft(e),
        "overlapping": overlapping(e),
        "universal": universal(e),
        "linear_complexity": linear_complexity(e),
        "serial": serial(e),
        "apen": apen(e),
        "cusum_f": cusum(e, True),
        "cusum_b": cusum(e, False),
    }
    ex = excursions(e)
    res["excursions"] = ex[0]
    res["excursions_variant"] = ex[1]
    print("cycles", ex[2])
    nov = non_overlapping(e)
    res["non_overlapping_first4"] = nov[:4]
    res["non_overlapping_last"] = nov[-1:]
    res["non_overlapping_sum"] = [sum(nov)]
    for k, v in res.items():
        print(k, ", ".join(repr(float(x)) for x in v))
