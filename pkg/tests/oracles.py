"""Independent brute-force references, deliberately free of numpy/scipy."""
import math
from collections import Counter


def average_ranks(values):
    # rank = 1 + (number strictly smaller) + (ties - 1) / 2
    return [1 + sum(w < v for w in values) + (sum(w == v for w in values) - 1) / 2
            for v in values]


def pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def spearman_oracle(xs, ys):
    return pearson(average_ranks(xs), average_ranks(ys))


def spearman_tie_free(xs, ys):
    n = len(xs)
    rx, ry = average_ranks(xs), average_ranks(ys)
    d2 = sum((a - b) ** 2 for a, b in zip(rx, ry))
    return 1 - 6 * d2 / (n * (n * n - 1))


def kendall_oracle(xs, ys):
    n = len(xs)
    conc = disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            p = (xs[i] - xs[j]) * (ys[i] - ys[j])
            if p > 0:
                conc += 1
            elif p < 0:
                disc += 1
    n0 = n * (n - 1) / 2
    n1 = sum(t * (t - 1) / 2 for t in Counter(xs).values())
    n2 = sum(t * (t - 1) / 2 for t in Counter(ys).values())
    return (conc - disc) / math.sqrt((n0 - n1) * (n0 - n2))


def adjacent_duplicates(sentences):
    """Indices i where sentence i+1 repeats sentence i."""
    return [i for i in range(len(sentences) - 1)
            if " ".join(sentences[i].split()) == " ".join(sentences[i + 1].split())]


def greedy_truncation_words(sentence_word_counts, limit):
    total = 0
    for k, n in enumerate(sentence_word_counts):
        if k > 0 and total + n > limit:
            break
        total += n
        if total > limit:
            break
    return total
