"""Independent brute-force oracles used to freeze expected values.

Everything here is deliberately written as plain nested loops over voxels
and bins, sharing no code with the package's vectorized implementations.
"""

import numpy as np


def brute_force_report(probs, labels, num_bins):
    """O(N*C*M) nested-loop accumulation of (count, sum_prob, sum_label)."""
    num_classes = probs.shape[0]
    flat_p = probs.reshape(num_classes, -1)
    flat_y = np.asarray(labels).reshape(-1)
    n = flat_p.shape[1]
    counts = np.zeros((num_classes, num_bins), dtype=np.int64)
    sum_prob = np.zeros((num_classes, num_bins))
    sum_label = np.zeros((num_classes, num_bins), dtype=np.int64)
    for c in range(num_classes):
        for i in range(n):
            p = flat_p[c, i]
            m = num_bins - 1
            for b in range(num_bins):
                if b / num_bins <= p < (b + 1) / num_bins:
                    m = b
                    break
            counts[c, m] += 1
            sum_prob[c, m] += p
            if num_classes == 1:
                hit = flat_y[i] != 0
            else:
                hit = flat_y[i] == c
            if hit:
                sum_label[c, m] += 1
    return counts, sum_prob, sum_label, n


def brute_force_metrics(counts, sum_prob, sum_label, total):
    """Per-class (ece, ace, mce) computed bin by bin from the raw sums."""
    num_classes, num_bins = counts.shape
    ece = np.zeros(num_classes)
    ace = np.zeros(num_classes)
    mce = np.zeros(num_classes)
    for c in range(num_classes):
        gap_sum = 0.0
        gap_max = 0.0
        nonempty = 0
        for m in range(num_bins):
            if counts[c, m] == 0:
                continue
            o = sum_label[c, m] / counts[c, m]
            e = sum_prob[c, m] / counts[c, m]
            gap = abs(o - e)
            ece[c] += counts[c, m] / total * gap
            gap_sum += gap
            gap_max = max(gap_max, gap)
            nonempty += 1
        ace[c] = gap_sum / nonempty
        mce[c] = gap_max
    return ece, ace, mce
