"""Scalar NT-Xent reference values frozen into tests/unit/test_contrastive.cpp.

Direct evaluation of the per-anchor term
    l(i, j) = -log( exp(sim(z_i, z_j)/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau) )
and of the batch mean over all 2N anchors, without any numerical tricks.
"""
import math


def sim(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    return dot / (math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(b * b for b in v)))


def pair(i, j, z, tau):
    num = math.exp(sim(z[i], z[j]) / tau)
    den = sum(math.exp(sim(z[i], z[k]) / tau) for k in range(len(z)) if k != i)
    return -math.log(num / den)


def batch(z, tau):
    n = len(z)
    return sum(pair(i, i ^ 1, z, tau) for i in range(n)) / n


hand = [[1, 0], [1, 0], [0, 1], [0, 1]]
print("hand pair", repr(pair(0, 1, hand, 1.0)), "closed form", repr(-math.log(math.e / (math.e + 2))))
print("hand batch", repr(batch(hand, 1.0)))
fixed = [[0.3, -1.2, 0.5], [0.1, -0.9, 0.8], [1.5, 0.2, -0.4], [1.1, 0.6, -0.2], [-0.7, 0.3, 0.9], [-0.2, -0.5, 1.3]]
for tau in (0.1, 0.5, 1.0):
    print("fixed tau", tau, repr(batch(fixed, tau)))
