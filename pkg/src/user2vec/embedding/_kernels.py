"""Compiled SGD inner loops (numba).

All randomness inside training comes from a per-chunk xorshift64* stream so that a
single-chunk run is reproducible bit for bit.
"""
import math

import numpy as np
from numba import njit, prange

MODE_CODES = {"cbow": 0, "sg": 1, "dm": 2, "dbow": 3}
OBJECTIVE_CODES = {"softmax": 0, "negative_sampling": 1}

_MUL = np.uint64(2685821657736338717)
_S12 = np.uint64(12)
_S25 = np.uint64(25)
_S27 = np.uint64(27)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def seed_state(seed: int) -> np.ndarray:
    # splitmix64 of the seed; xorshift needs a non-zero state
    z = (int(seed) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 31
    return np.array([z or 1], dtype=np.uint64)


@njit(cache=True)
def _next(state):
    x = state[0]
    x ^= x >> _S12
    x ^= x << _S25
    x ^= x >> _S27
    state[0] = x
    return x * _MUL


@njit(cache=True)
def _uniform(state):
    return (_next(state) >> _S11) * _INV53


@njit(cache=True)
def _randint(state, n):
    return np.int64((_next(state) >> _S11) % np.uint64(n))


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit(cache=True)
def draw_negative(cum, state, target):
    V = cum.shape[0]
    for _ in range(64):
        j = np.searchsorted(cum, _uniform(state), side="right")
        if j >= V:
            j = V - 1
        if j != target:
            return j
    return (target + 1) % V


@njit(cache=True)
def sgd_step(W, W_out, D, ctx, n_ctx, doc, target, objective, negs, lr,
             h, gh, zbuf, upd_w, upd_out, upd_d):
    """One SGD update on a single example. Returns (loss, output rows updated).

    The hidden state is the mean of ``ctx[:n_ctx]`` word vectors and, if
    ``doc >= 0``, the document vector. The loss is NaN when the update is not finite.
    """
    N = W.shape[1]
    n_in = n_ctx + (1 if doc >= 0 else 0)
    for c in range(N):
        h[c] = 0.0
        gh[c] = 0.0
    for i in range(n_ctx):
        r = ctx[i]
        for c in range(N):
            h[c] += W[r, c]
    if doc >= 0:
        for c in range(N):
            h[c] += D[doc, c]
    inv = 1.0 / n_in
    for c in range(N):
        h[c] *= inv

    loss = 0.0
    n_out = 0
    if objective == 0:
        V = W_out.shape[0]
        zmax = -np.inf
        for j in range(V):
            s = 0.0
            for c in range(N):
                s += W_out[j, c] * h[c]
            zbuf[j] = s
            if s > zmax:
                zmax = s
        zt = zbuf[target] - zmax
        tot = 0.0
        for j in range(V):
            zbuf[j] = math.exp(zbuf[j] - zmax)
            tot += zbuf[j]
        loss = math.log(tot) - zt
        for j in range(V):
            g = zbuf[j] / tot
            if j == target:
                g -= 1.0
            for c in range(N):
                gh[c] += g * W_out[j, c]
            if upd_out:
                for c in range(N):
                    W_out[j, c] -= lr * g * h[c]
            n_out += 1
    else:
        k = negs.shape[0]
        for d in range(k + 1):
            if d == 0:
                j = target
                label = 1.0
            else:
                j = negs[d - 1]
                label = 0.0
            s = 0.0
            for c in range(N):
                s += W_out[j, c] * h[c]
            if label > 0.0:
                loss -= _log_sigmoid(s)
            else:
                loss -= _log_sigmoid(-s)
            g = 1.0 / (1.0 + math.exp(-s)) - label
            for c in range(N):
                gh[c] += g * W_out[j, c]
            if upd_out:
                for c in range(N):
                    W_out[j, c] -= lr * g * h[c]
            n_out += 1

    chk = 0.0
    for c in range(N):
        chk += gh[c]
    if not math.isfinite(chk) or not math.isfinite(loss):
        return np.nan, n_out

    scale = lr * inv
    if upd_w:
        for i in range(n_ctx):
            r = ctx[i]
            for c in range(N):
                W[r, c] -= scale * gh[c]
    if upd_d and doc >= 0:
        for c in range(N):
            D[doc, c] -= scale * gh[c]
    return loss, n_out


@njit(cache=True)
def _run_range(W, W_out, D, tokens, offsets, doc_ids, d0, d1, mode, objective, window, k,
               cum, keep_prob, lr_start, lr_end, epoch, epochs, total_tokens, progress_mult,
               state, upd_w, upd_out, upd_d, stats):
    """Process documents d0..d1-1 for one epoch.

    stats: [loss sum, pairs, output updates]; returns the failing step or -1.
    """
    N = W.shape[1]
    h = np.zeros(N)
    gh = np.zeros(N)
    zbuf = np.zeros(W_out.shape[0])
    ctx = np.zeros(2 * window + 1, dtype=np.int64)
    negs = np.zeros(k if objective == 1 else 0, dtype=np.int64)
    maxlen = 0
    for p in range(d0, d1):
        if offsets[p + 1] - offsets[p] > maxlen:
            maxlen = offsets[p + 1] - offsets[p]
    buf = np.zeros(maxlen, dtype=np.int64)
    total_work = float(epochs) * total_tokens
    done = 0
    step = 0
    for p in range(d0, d1):
        m = 0
        for i in range(offsets[p], offsets[p + 1]):
            tok = tokens[i]
            kp = keep_prob[tok]
            if kp >= 1.0 or _uniform(state) < kp:
                buf[m] = tok
                m += 1
        doc = doc_ids[p]
        for t in range(offsets[p + 1] - offsets[p]):
            frac = (epoch * total_tokens + done * progress_mult) / total_work
            lr = lr_start - (lr_start - lr_end) * frac
            if lr < lr_end:
                lr = lr_end
            done += 1
            if t >= m:
                continue
            cur = buf[t]
            if mode == 3:
                if objective == 1:
                    for q in range(k):
                        negs[q] = draw_negative(cum, state, cur)
                loss, n_out = sgd_step(W, W_out, D, ctx, 0, doc, cur, objective, negs, lr,
                                       h, gh, zbuf, upd_w, upd_out, upd_d)
                step += 1
                if not math.isfinite(loss):
                    return step
                stats[0] += loss
                stats[1] += 1
                stats[2] += n_out
                continue
            b = 1 + _randint(state, window)
            lo = t - b if t - b > 0 else 0
            hi = t + b + 1 if t + b + 1 < m else m
            if mode == 1:
                for s in range(lo, hi):
                    if s == t:
                        continue
                    ctx[0] = cur
                    tgt = buf[s]
                    if objective == 1:
                        for q in range(k):
                            negs[q] = draw_negative(cum, state, tgt)
                    loss, n_out = sgd_step(W, W_out, D, ctx, 1, -1, tgt, objective, negs, lr,
                                           h, gh, zbuf, upd_w, upd_out, upd_d)
                    step += 1
                    if not math.isfinite(loss):
                        return step
                    stats[0] += loss
                    stats[1] += 1
                    stats[2] += n_out
                continue
            n_ctx = 0
            for s in range(lo, hi):
                if s != t:
                    ctx[n_ctx] = buf[s]
                    n_ctx += 1
            d = doc if mode == 2 else -1
            if n_ctx == 0 and d < 0:
                continue
            if objective == 1:
                for q in range(k):
                    negs[q] = draw_negative(cum, state, cur)
            loss, n_out = sgd_step(W, W_out, D, ctx, n_ctx, d, cur, objective, negs, lr,
                                   h, gh, zbuf, upd_w, upd_out, upd_d)
            step += 1
            if not math.isfinite(loss):
                return step
            stats[0] += loss
            stats[1] += 1
            stats[2] += n_out
    return -1


@njit(cache=True)
def train_serial(W, W_out, D, tokens, offsets, doc_ids, mode, objective, window, k, cum,
                 keep_prob, lr_start, lr_end, epochs, state, upd_w, upd_out, upd_d, stats):
    """stats has shape (epochs, 3). Returns -1 or the global index of a failing step."""
    total_tokens = float(offsets[-1])
    P = offsets.shape[0] - 1
    steps = 0
    for e in range(epochs):
        err = _run_range(W, W_out, D, tokens, offsets, doc_ids, 0, P, mode, objective, window, k,
                         cum, keep_prob, lr_start, lr_end, e, epochs, total_tokens, 1.0,
                         state, upd_w, upd_out, upd_d, stats[e])
        if err >= 0:
            return steps + err
        steps += np.int64(stats[e, 1])
    return -1


@njit(parallel=True, cache=True)
def train_parallel(W, W_out, D, tokens, offsets, doc_ids, bounds, mode, objective, window, k,
                   cum, keep_prob, lr_start, lr_end, epochs, states, upd_w, upd_out, upd_d, stats):
    """Lock-free multi-chunk training; stats has shape (epochs, n_chunks, 3)."""
    total_tokens = float(offsets[-1])
    n_chunks = bounds.shape[0] - 1
    errs = np.full(n_chunks, -1, dtype=np.int64)
    for e in range(epochs):
        for c in prange(n_chunks):
            errs[c] = _run_range(W, W_out, D, tokens, offsets, doc_ids, bounds[c], bounds[c + 1],
                                 mode, objective, window, k, cum, keep_prob, lr_start, lr_end,
                                 e, epochs, total_tokens, float(n_chunks), states[c:c + 1],
                                 upd_w, upd_out, upd_d, stats[e, c])
        for c in range(n_chunks):
            if errs[c] >= 0:
                return errs[c]
    return -1
