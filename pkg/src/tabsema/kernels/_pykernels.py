"""Pure-Python/numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable.
Both implementations must stay numerically identical: the test suite
cross-checks them whenever the extension is importable.
"""

import numpy as np


def jaro(a, b):
    """Jaro similarity of two strings, in [0, 1].

    Matching window is floor(max(|a|,|b|)/2) - 1; with m matching
    characters and k matched-but-misaligned characters, the similarity is
    (m/|a| + m/|b| + (m - k/2)/m) / 3.  Two empty strings are identical
    (1.0); empty vs non-empty is 0.0.
    """
    la, lb = len(a), len(b)
    if la == 0 and lb == 0:
        return 1.0
    if la == 0 or lb == 0:
        return 0.0
    window = max(la, lb) // 2 - 1
    if window < 0:
        window = 0
    a_matched = [False] * la
    b_matched = [False] * lb
    m = 0
    for i in range(la):
        lo = max(0, i - window)
        hi = min(lb, i + window + 1)
        for j in range(lo, hi):
            if not b_matched[j] and a[i] == b[j]:
                a_matched[i] = True
                b_matched[j] = True
                m += 1
                break
    if m == 0:
        return 0.0
    k = 0
    j = 0
    for i in range(la):
        if a_matched[i]:
            while not b_matched[j]:
                j += 1
            if a[i] != b[j]:
                k += 1
            j += 1
    return (m / la + m / lb + (m - k / 2.0) / m) / 3.0


def gru_sequence(x, w_h, u_h, b_h, w_z, u_z, b_z, w_r, u_r, b_r):
    """Run a GRU over a T x d input, starting from the zero state.

    Update rule: h_t = (1 - z_t) * h_prev + z_t * h_tilde, with
    h_tilde = tanh(W_h x_t + r_t * (U_h h_prev) + b_h) and logistic
    gates z_t, r_t.

    Returns (h, r, z, hc): each T x H, where r/z/hc are the per-step gate
    and candidate activations (cached for backpropagation).
    """
    x = np.asarray(x, dtype=np.float64)
    t_len = x.shape[0]
    hidden = w_h.shape[0]
    h = np.zeros((t_len, hidden))
    r = np.zeros((t_len, hidden))
    z = np.zeros((t_len, hidden))
    hc = np.zeros((t_len, hidden))
    h_prev = np.zeros(hidden)
    for t in range(t_len):
        x_t = x[t]
        r_t = _sigmoid(w_r @ x_t + u_r @ h_prev + b_r)
        z_t = _sigmoid(w_z @ x_t + u_z @ h_prev + b_z)
        hc_t = np.tanh(w_h @ x_t + r_t * (u_h @ h_prev) + b_h)
        h_t = (1.0 - z_t) * h_prev + z_t * hc_t
        r[t] = r_t
        z[t] = z_t
        hc[t] = hc_t
        h[t] = h_t
        h_prev = h_t
    return h, r, z, hc


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))
