"""Independent reference computations used by the test suites.

These deliberately avoid the package's forward/backward/Viterbi code:
sequence scores come from full enumeration and gradients from central
finite differences, so they can vouch for the dynamic-programming paths.
"""

import numpy as np
from scipy.special import logsumexp

from secondpass.crf import log_likelihood


def enumerate_scores(emission, transition, start, stop, feat_ids):
    """Score every tag sequence, in lexicographic order of tag indices."""
    n = len(feat_ids)
    n_tags = transition.shape[0]
    e = np.stack(
        [emission[ids].sum(axis=0) if len(ids) else np.zeros(n_tags) for ids in feat_ids]
    )
    grids = np.meshgrid(*([np.arange(n_tags)] * n), indexing="ij")
    seqs = np.stack([g.ravel() for g in grids], axis=1)
    scores = e[np.arange(n), seqs].sum(axis=1) + start[seqs[:, 0]] + stop[seqs[:, -1]]
    if n > 1:
        scores = scores + transition[seqs[:, :-1], seqs[:, 1:]].sum(axis=1)
    return seqs, scores


def brute_force_decode(emission, transition, start, stop, feat_ids):
    """Best sequence (first on ties), its log-probability, and the log-partition."""
    seqs, scores = enumerate_scores(emission, transition, start, stop, feat_ids)
    log_z = float(logsumexp(scores))
    best = int(np.argmax(scores))
    return seqs[best], float(scores[best] - log_z), log_z


def brute_force_analysis(emission, transition, start, stop, feat_ids):
    """As brute_force_decode, plus the margin between the two best scores.

    Distinct paths can tie exactly (positions with identical feature sets
    make swapped paths sum the same terms), in which case any maximizer is
    a correct decode and only the log-probability can be compared.
    """
    seqs, scores = enumerate_scores(emission, transition, start, stop, feat_ids)
    log_z = float(logsumexp(scores))
    best = int(np.argmax(scores))
    if len(scores) > 1:
        top_two = np.partition(scores, len(scores) - 2)[-2:]
        margin = float(top_two[1] - top_two[0])
    else:
        margin = float("inf")
    return seqs, scores, log_z, best, margin


def numeric_gradient(emission, transition, start, stop, feat_ids, gold, h=1e-5):
    """Central-difference gradient of the per-sentence log-likelihood."""
    params = [emission.copy(), transition.copy(), start.copy(), stop.copy()]
    grads = []
    for arr in params:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = log_likelihood(*params, feat_ids, gold)
            arr[idx] = orig - h
            down = log_likelihood(*params, feat_ids, gold)
            arr[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def random_instance(rng, max_len=6, max_tags=5, n_features=8, max_feats_per_pos=3):
    n = int(rng.integers(1, max_len + 1))
    n_tags = int(rng.integers(2, max_tags + 1))
    emission = rng.normal(0.0, 1.0, size=(n_features, n_tags))
    transition = rng.normal(0.0, 1.0, size=(n_tags, n_tags))
    start = rng.normal(0.0, 1.0, size=n_tags)
    stop = rng.normal(0.0, 1.0, size=n_tags)
    feat_ids = [
        np.sort(
            rng.choice(n_features, size=int(rng.integers(1, max_feats_per_pos + 1)), replace=False)
        ).astype(np.intp)
        for _ in range(n)
    ]
    gold = rng.integers(0, n_tags, size=n).astype(np.intp)
    return emission, transition, start, stop, feat_ids, gold
