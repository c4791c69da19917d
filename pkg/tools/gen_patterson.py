"""Regenerate the Gauss-Patterson table shipped in ``projection_filter/data``.

Each level adds n+1 nodes to the n nodes of the previous level. The new nodes
are the roots of the polynomial E of degree n+1 satisfying

    int_{-1}^{1} P(x) E(x) L_k(x) dx = 0,   k = 0..n,

where P is the node polynomial of the previous level and L_k are Legendre
polynomials. Weights are interpolatory. Everything runs in mpmath.

Usage: python tools/gen_patterson.py [max_level] > src/projection_filter/data/gauss_patterson.txt
"""
import sys

import mpmath as mp

mp.mp.dps = 160


def legendre_all(x, n):
    """L_0(x) .. L_n(x) by the three-term recurrence."""
    out = [mp.mpf(1), x]
    for k in range(1, n):
        out.append(((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1))
    return out[: n + 1]


def gauss_legendre(n):
    nodes, weights = [], []
    for i in range(1, n + 1):
        x = mp.cos(mp.pi * (i - mp.mpf(1) / 4) / (n + mp.mpf(1) / 2))
        for _ in range(100):
            p = legendre_all(x, n)
            dp = n * (x * p[n] - p[n - 1]) / (x * x - 1)
            dx = p[n] / dp
            x -= dx
            if abs(dx) < mp.mpf(10) ** (-mp.mp.dps + 5):
                break
        p = legendre_all(x, n)
        dp = n * (x * p[n] - p[n - 1]) / (x * x - 1)
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    return nodes, weights


def extend(old_nodes):
    n = len(old_nodes)
    deg = n + 1
    gl_x, gl_w = gauss_legendre((3 * n + 2) // 2 + 2)
    prod = []
    leg = []
    for x in gl_x:
        p = mp.mpf(1)
        for t in old_nodes:
            p *= x - t
        prod.append(p)
        leg.append(legendre_all(x, deg))
    # unknowns a_0..a_n, a_{n+1} = 1
    A = mp.matrix(n + 1, n + 1)
    b = mp.matrix(n + 1, 1)
    for k in range(n + 1):
        for i in range(n + 1):
            A[k, i] = mp.fsum(w * p * l[i] * l[k] for w, p, l in zip(gl_w, prod, leg))
        b[k] = -mp.fsum(w * p * l[deg] * l[k] for w, p, l in zip(gl_w, prod, leg))
    a = list(mp.lu_solve(A, b)) + [mp.mpf(1)]

    def E(x):
        return mp.fsum(c * l for c, l in zip(a, legendre_all(x, deg)))

    brackets = [mp.mpf(-1)] + sorted(old_nodes) + [mp.mpf(1)]
    new = []
    for lo, hi in zip(brackets[:-1], brackets[1:]):
        new.append(bisect(E, lo, hi))
    return sorted(list(old_nodes) + new)


def bisect(fn, lo, hi, bits=None):
    """Root of ``fn`` in a sign-change bracket to full working precision."""
    flo = fn(lo)
    for _ in range(bits or int(mp.mp.prec) + 10):
        mid = (lo + hi) / 2
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def interpolatory_weights(nodes):
    """w_j = int l_j(x) dx with l_j the Lagrange basis, by Gauss-Legendre (exact)."""
    N = len(nodes)
    gl_x, gl_w = gauss_legendre((N + 1) // 2 + 1)
    weights = []
    for j, xj in enumerate(nodes):
        others = nodes[:j] + nodes[j + 1:]
        denom = mp.fprod(xj - t for t in others)
        num = mp.fsum(w * mp.fprod(x - t for t in others) for x, w in zip(gl_x, gl_w))
        weights.append(num / denom)
    return weights


def main(max_level=9):
    nodes = [mp.mpf(0)]
    print("# Gauss-Patterson rules on (-1,1), unit weight function")
    print("# level node weight   (30 significant digits)")
    print("1 0 2")
    for level in range(2, max_level + 1):
        nodes = extend(nodes)
        # enforce exact symmetry
        half = len(nodes) // 2
        for i in range(half):
            v = (nodes[-1 - i] - nodes[i]) / 2
            nodes[i], nodes[-1 - i] = -v, v
        nodes[half] = mp.mpf(0)
        weights = interpolatory_weights(nodes)
        for x, w in zip(nodes, weights):
            print(level, mp.nstr(x, 30, min_fixed=-1, max_fixed=1), mp.nstr(w, 30))
        sys.stdout.flush()
        print(f"level {level}: {len(nodes)} nodes", file=sys.stderr)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 9)
