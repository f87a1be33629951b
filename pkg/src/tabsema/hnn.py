"""Hybrid neural network over micro tables.

Architecture: per-cell attentive bidirectional GRU embedding, convolution
filters down the target column and across the main-cell row, per-filter max
pooling, a fully connected layer and a softmax head.  Gradients are
hand-derived backpropagation; training uses Adam.

All math is float64.  The GRU scan itself runs through the kernels
dispatcher (compiled extension when available).
"""

import hashlib
import json
from dataclasses import dataclass, asdict

import numpy as np

from .encoder import (EmbeddingTable, embed_entity_cell, encode_date_cell,
                      encode_number_cell, tokenize_and_crop,
                      PAD)
from .kernels import gru_sequence
from .tables import ClassCatalog, ColumnKind, MicroTable

CHECKPOINT_VERSION = 1
INIT_SCALE = 0.08


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes NaN."""


class CheckpointError(ValueError):
    """Raised on unreadable, corrupt or version-mismatched checkpoints."""


def catalog_hash(catalog: ClassCatalog) -> str:
    payload = json.dumps(list(catalog.classes)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


@dataclass
class HNNConfig:
    m: int = 5
    l: int = 4
    t_len: int = 10
    hidden: int = 150
    attn_size: int = 50
    theta1: tuple = (2, 3, 4)
    theta2: tuple = (2, 3)
    kappa1: int = 32
    kappa2: int = 32
    d_w: int = 300
    k: int = 0
    fc_size: int = 100
    fc_equals_logits: bool = True
    use_att_birnn: bool = True
    use_conv_column: bool = True
    use_conv_row: bool = True

    def __post_init__(self):
        self.theta1 = tuple(sorted(self.theta1))
        self.theta2 = tuple(sorted(self.theta2))
        if self.use_conv_column and not all(2 <= k1 <= self.m for k1 in self.theta1):
            raise ValueError("theta1 must be within {2..m}")
        if self.use_conv_row and not all(2 <= k2 <= self.l + 1 for k2 in self.theta2):
            raise ValueError("theta2 must be within {2..l+1}")
        if self.k < 1:
            raise ValueError("class count k must be set")
        if not self.use_att_birnn and self.d_w > self.d0:
            raise ValueError("mean-vector mode needs d_w <= 2*hidden")

    @property
    def d0(self):
        return 2 * self.hidden

    @property
    def fc_input_dim(self):
        dim = 0
        if self.use_conv_column:
            dim += self.kappa1 * len(self.theta1)
        if self.use_conv_row:
            dim += self.kappa2 * len(self.theta2)
        if dim == 0:
            dim = self.d0
        return dim

    @property
    def f(self):
        return self.k if self.fc_equals_logits else self.fc_size


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0


class HNNModel:
    """All learnable parameters plus the architecture configuration."""

    def __init__(self, cfg: HNNConfig, params: dict):
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: HNNConfig, seed: int = 0):
        rng = np.random.RandomState(seed)

        def u(*shape):
            return rng.uniform(-INIT_SCALE, INIT_SCALE, shape)

        params = {}
        h, dw, d0, a = cfg.hidden, cfg.d_w, cfg.d0, cfg.attn_size
        if cfg.use_att_birnn:
            for direction in ("fwd", "bwd"):
                for gate in ("h", "z", "r"):
                    params["gru_%s.w_%s" % (direction, gate)] = u(h, dw)
                    params["gru_%s.u_%s" % (direction, gate)] = u(h, h)
                    params["gru_%s.b_%s" % (direction, gate)] = u(h)
            params["attn.w_w"] = u(a, d0)
            params["attn.b_w"] = u(a)
            params["attn.u_w"] = u(a)
        if cfg.use_conv_column:
            for k1 in cfg.theta1:
                params["conv_col.w_%d" % k1] = u(cfg.kappa1, k1, d0)
                params["conv_col.b_%d" % k1] = u(cfg.kappa1)
        if cfg.use_conv_row:
            for k2 in cfg.theta2:
                params["conv_row.w_%d" % k2] = u(cfg.kappa2, k2, d0)
                params["conv_row.b_%d" % k2] = u(cfg.kappa2)
        params["fc.w"] = u(cfg.fc_input_dim, cfg.f)
        params["fc.b"] = u(cfg.f)
        if not cfg.fc_equals_logits:
            params["out.w"] = u(cfg.f, cfg.k)
            params["out.b"] = u(cfg.k)
        return cls(cfg, params)

    def param_names(self):
        return sorted(self.params.keys())

    def zero_grads(self):
        return {name: np.zeros_like(p) for name, p in self.params.items()}

    def gru(self, direction):
        p = self.params
        pre = "gru_%s." % direction
        return (p[pre + "w_h"], p[pre + "u_h"], p[pre + "b_h"],
                p[pre + "w_z"], p[pre + "u_z"], p[pre + "b_z"],
                p[pre + "w_r"], p[pre + "u_r"], p[pre + "b_r"])

    def copy(self):
        return HNNModel(self.cfg, {k: v.copy() for k, v in self.params.items()})


# ---------------------------------------------------------------------------
# Encoded micro tables
# ---------------------------------------------------------------------------

class EncodedCell:
    """Either a token-matrix entity cell or a fixed deterministic vector."""

    __slots__ = ("kind", "tokens", "n_tokens", "vector")

    def __init__(self, kind, tokens=None, n_tokens=0, vector=None):
        self.kind = kind  # "entity" or "det"
        self.tokens = tokens  # t_len x d_w
        self.n_tokens = n_tokens
        self.vector = vector  # d0


class EncodedMicroTable:
    """Grid of encoded cells, column-major: [target, L_1, ..., L_l]."""

    def __init__(self, grid, m, l):
        self.grid = grid  # grid[col][row] -> EncodedCell
        self.m = m
        self.l = l


def encode_micro_table(mt: MicroTable, emb: EmbeddingTable, cfg: HNNConfig):
    columns = [mt.target] + list(mt.surrounding)
    grid = []
    for col in columns:
        enc_col = []
        for cell in col.cells:
            if col.kind == ColumnKind.NUMBER:
                enc_col.append(EncodedCell(
                    "det", vector=encode_number_cell(cell.raw_text, cfg.d0)))
            elif col.kind == ColumnKind.DATE:
                enc_col.append(EncodedCell(
                    "det", vector=encode_date_cell(cell.raw_text, cfg.d0)))
            else:
                tokens = tokenize_and_crop(cell.raw_text, cfg.t_len)
                n = sum(1 for t in tokens if t != PAD)
                enc_col.append(EncodedCell(
                    "entity",
                    tokens=embed_entity_cell(cell.raw_text, emb, cfg.t_len),
                    n_tokens=n))
        grid.append(enc_col)
    return EncodedMicroTable(grid, cfg.m, cfg.l)


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

def gru_step(x_t, h_prev, w_h, u_h, b_h, w_z, u_z, b_z, w_r, u_r, b_r):
    """One GRU update: h_t = (1 - z_t) * h_prev + z_t * h_tilde."""
    r_t = _sigmoid(w_r @ x_t + u_r @ h_prev + b_r)
    z_t = _sigmoid(w_z @ x_t + u_z @ h_prev + b_z)
    hc_t = np.tanh(w_h @ x_t + r_t * (u_h @ h_prev) + b_h)
    return (1.0 - z_t) * h_prev + z_t * hc_t


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def softmax(v):
    shifted = v - np.max(v)
    e = np.exp(shifted)
    return e / e.sum()


def birnn_attention_embed(cell_matrix, model: HNNModel, return_cache=False):
    """Attentive BiGRU cell embedding: a = sum_t alpha_t [h_fwd_t, h_bwd_t]."""
    x = np.asarray(cell_matrix, dtype=np.float64)
    hf, rf, zf, hcf = gru_sequence(x, *model.gru("fwd"))
    x_rev = x[::-1].copy()
    hb_rev, rb, zb, hcb = gru_sequence(x_rev, *model.gru("bwd"))
    e = np.concatenate([hf, hb_rev[::-1]], axis=1)  # t_len x d0

    w_w, b_w, u_w = (model.params["attn.w_w"], model.params["attn.b_w"],
                     model.params["attn.u_w"])
    u = np.tanh(e @ w_w.T + b_w)  # t_len x attn_size
    scores = u @ u_w
    alpha = softmax(scores)
    a = alpha @ e
    if not return_cache:
        return a
    cache = {"x": x, "x_rev": x_rev, "hf": hf, "rf": rf, "zf": zf, "hcf": hcf,
             "hb_rev": hb_rev, "rb": rb, "zb": zb, "hcb": hcb,
             "e": e, "u": u, "alpha": alpha}
    return a, cache


def _cell_embed_forward(enc_cell: EncodedCell, model: HNNModel):
    """Embed one encoded cell into a d0 vector, caching for backprop."""
    cfg = model.cfg
    if enc_cell.kind == "det":
        return enc_cell.vector, None
    if not cfg.use_att_birnn:
        a = np.zeros(cfg.d0)
        if enc_cell.n_tokens > 0:
            a[:cfg.d_w] = enc_cell.tokens[:enc_cell.n_tokens].mean(axis=0)
        return a, None
    return birnn_attention_embed(enc_cell.tokens, model, return_cache=True)


def embed_micro_table(mt: MicroTable, emb: EmbeddingTable, model: HNNModel):
    """Embed a micro table into the full m x (l+1) x d0 tensor."""
    cfg = model.cfg
    enc = encode_micro_table(mt, emb, cfg)
    tensor = np.zeros((cfg.m, cfg.l + 1, cfg.d0))
    for j, col in enumerate(enc.grid):
        for i, cell in enumerate(col):
            tensor[i, j], _ = _cell_embed_forward(cell, model)
    return tensor


def _needed_positions(cfg: HNNConfig):
    """(row, col) cell positions that actually feed the network head."""
    needed = {(0, 0)}
    if cfg.use_conv_column:
        needed.update((i, 0) for i in range(cfg.m))
    if cfg.use_conv_row:
        needed.update((0, j) for j in range(cfg.l + 1))
    return needed


def _conv_branch_forward(inputs, weights, biases):
    """Valid 1-d convolution + ReLU + per-filter max pooling.

    inputs: n x d matrix; weights: kappa x k x d; returns pooled (kappa,)
    plus the cache needed for backprop.
    """
    kappa, k, _ = weights.shape
    n_pos = inputs.shape[0] - k + 1
    pre = np.zeros((kappa, n_pos))
    for p in range(n_pos):
        window = inputs[p:p + k]
        pre[:, p] = np.tensordot(weights, window, axes=([1, 2], [0, 1])) + biases
    act = np.maximum(pre, 0.0)
    argmax = np.argmax(act, axis=1)
    pooled = act[np.arange(kappa), argmax]
    return pooled, (pre, argmax)


def _head_forward(col_matrix, row_matrix, model: HNNModel):
    """Conv branches + FC + softmax from the target-column and main-row matrices."""
    cfg = model.cfg
    cache = {"col": col_matrix, "row": row_matrix, "conv": {}}
    pooled_parts = []
    if cfg.use_conv_column:
        for k1 in cfg.theta1:
            pooled, c = _conv_branch_forward(
                col_matrix, model.params["conv_col.w_%d" % k1],
                model.params["conv_col.b_%d" % k1])
            cache["conv"][("col", k1)] = c
            pooled_parts.append(pooled)
    if cfg.use_conv_row:
        for k2 in cfg.theta2:
            pooled, c = _conv_branch_forward(
                row_matrix, model.params["conv_row.w_%d" % k2],
                model.params["conv_row.b_%d" % k2])
            cache["conv"][("row", k2)] = c
            pooled_parts.append(pooled)
    if pooled_parts:
        fc_in = np.concatenate(pooled_parts)
    else:
        fc_in = col_matrix[0]
    f_hnn = fc_in @ model.params["fc.w"] + model.params["fc.b"]
    if cfg.fc_equals_logits:
        logits = f_hnn
    else:
        logits = f_hnn @ model.params["out.w"] + model.params["out.b"]
    y = softmax(logits)
    cache["fc_in"] = fc_in
    cache["f_hnn"] = f_hnn
    cache["y"] = y
    return f_hnn, y, cache


def forward(tensor, model: HNNModel):
    """Score a pre-embedded m x (l+1) x d0 tensor; returns (f_hnn, y)."""
    cfg = model.cfg
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.shape != (cfg.m, cfg.l + 1, cfg.d0):
        raise ValueError("tensor shape %s does not match model (%d, %d, %d)"
                         % (tensor.shape, cfg.m, cfg.l + 1, cfg.d0))
    f_hnn, y, _ = _head_forward(tensor[:, 0, :], tensor[0, :, :], model)
    return f_hnn, y


def forward_encoded(enc: EncodedMicroTable, model: HNNModel):
    """End-to-end forward from encoded cells; returns (f_hnn, y, cache)."""
    cfg = model.cfg
    needed = _needed_positions(cfg)
    col_matrix = np.zeros((cfg.m, cfg.d0))
    row_matrix = np.zeros((cfg.l + 1, cfg.d0))
    cell_caches = {}
    for (i, j) in needed:
        a, cache = _cell_embed_forward(enc.grid[j][i], model)
        cell_caches[(i, j)] = cache
        if j == 0:
            col_matrix[i] = a
        if i == 0:
            row_matrix[j] = a
    f_hnn, y, head_cache = _head_forward(col_matrix, row_matrix, model)
    head_cache["cells"] = cell_caches
    head_cache["enc"] = enc
    return f_hnn, y, head_cache


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def _gru_backward(x, h, r, z, hc, u_h_mat, u_z_mat, u_r_mat, dh_ext,
                  grads, prefix):
    """BPTT through one GRU direction; dh_ext holds per-step gradients."""
    t_len, hidden = h.shape
    dh_carry = np.zeros(hidden)
    for t in range(t_len - 1, -1, -1):
        h_prev = h[t - 1] if t > 0 else np.zeros(hidden)
        dh = dh_ext[t] + dh_carry
        dz = dh * (hc[t] - h_prev)
        dhc = dh * z[t]
        dh_prev = dh * (1.0 - z[t])

        dph = dhc * (1.0 - hc[t] ** 2)
        grads[prefix + "w_h"] += np.outer(dph, x[t])
        grads[prefix + "b_h"] += dph
        dr = dph * (u_h_mat @ h_prev)
        dph_r = dph * r[t]
        grads[prefix + "u_h"] += np.outer(dph_r, h_prev)
        dh_prev += u_h_mat.T @ dph_r

        dpz = dz * z[t] * (1.0 - z[t])
        grads[prefix + "w_z"] += np.outer(dpz, x[t])
        grads[prefix + "u_z"] += np.outer(dpz, h_prev)
        grads[prefix + "b_z"] += dpz
        dh_prev += u_z_mat.T @ dpz

        dpr = dr * r[t] * (1.0 - r[t])
        grads[prefix + "w_r"] += np.outer(dpr, x[t])
        grads[prefix + "u_r"] += np.outer(dpr, h_prev)
        grads[prefix + "b_r"] += dpr
        dh_prev += u_r_mat.T @ dpr

        dh_carry = dh_prev


def _cell_embed_backward(cache, da, model: HNNModel, grads):
    """Backprop d(loss)/d(cell embedding) into attention and GRU parameters."""
    if cache is None:
        return  # deterministic or mean-vector cell: no learnable parameters
    cfg = model.cfg
    e, u, alpha = cache["e"], cache["u"], cache["alpha"]
    u_w = model.params["attn.u_w"]
    w_w = model.params["attn.w_w"]

    dalpha = e @ da
    de = alpha[:, None] * da[None, :]
    ds = alpha * (dalpha - np.dot(alpha, dalpha))
    du = ds[:, None] * u_w[None, :]
    grads["attn.u_w"] += u.T @ ds
    dz_u = du * (1.0 - u ** 2)
    grads["attn.w_w"] += dz_u.T @ e
    grads["attn.b_w"] += dz_u.sum(axis=0)
    de += dz_u @ w_w

    hidden = cfg.hidden
    dhf = de[:, :hidden]
    dhb = de[:, hidden:]
    _gru_backward(cache["x"], cache["hf"], cache["rf"], cache["zf"],
                  cache["hcf"], model.params["gru_fwd.u_h"],
                  model.params["gru_fwd.u_z"], model.params["gru_fwd.u_r"],
                  dhf, grads, "gru_fwd.")
    _gru_backward(cache["x_rev"], cache["hb_rev"], cache["rb"], cache["zb"],
                  cache["hcb"], model.params["gru_bwd.u_h"],
                  model.params["gru_bwd.u_z"], model.params["gru_bwd.u_r"],
                  dhb[::-1], grads, "gru_bwd.")


def _conv_branch_backward(dpooled, inputs, weights, cache, grads, w_name, b_name):
    pre, argmax = cache
    kappa, k, _ = weights.shape
    dinputs = np.zeros_like(inputs)
    for f in range(kappa):
        p = argmax[f]
        if pre[f, p] <= 0.0:
            continue  # pooled value came through a dead ReLU (max is 0)
        dpre = dpooled[f]
        grads[w_name][f] += dpre * inputs[p:p + k]
        grads[b_name][f] += dpre
        dinputs[p:p + k] += dpre * weights[f]
    return dinputs


def _backward(dlogits, cache, model: HNNModel, grads):
    cfg = model.cfg
    if cfg.fc_equals_logits:
        df_hnn = dlogits
    else:
        grads["out.w"] += np.outer(cache["f_hnn"], dlogits)
        grads["out.b"] += dlogits
        df_hnn = model.params["out.w"] @ dlogits
    fc_in = cache["fc_in"]
    grads["fc.w"] += np.outer(fc_in, df_hnn)
    grads["fc.b"] += df_hnn
    dfc_in = model.params["fc.w"] @ df_hnn

    dcol = np.zeros_like(cache["col"])
    drow = np.zeros_like(cache["row"])
    offset = 0
    if cfg.use_conv_column:
        for k1 in cfg.theta1:
            dpooled = dfc_in[offset:offset + cfg.kappa1]
            offset += cfg.kappa1
            dcol += _conv_branch_backward(
                dpooled, cache["col"], model.params["conv_col.w_%d" % k1],
                cache["conv"][("col", k1)], grads,
                "conv_col.w_%d" % k1, "conv_col.b_%d" % k1)
    if cfg.use_conv_row:
        for k2 in cfg.theta2:
            dpooled = dfc_in[offset:offset + cfg.kappa2]
            offset += cfg.kappa2
            drow += _conv_branch_backward(
                dpooled, cache["row"], model.params["conv_row.w_%d" % k2],
                cache["conv"][("row", k2)], grads,
                "conv_row.w_%d" % k2, "conv_row.b_%d" % k2)
    if offset == 0:
        dcol[0] += dfc_in

    for (i, j), cell_cache in cache["cells"].items():
        da = np.zeros(cfg.d0)
        if j == 0:
            da += dcol[i]
        if i == 0:
            da += drow[j]
        _cell_embed_backward(cell_cache, da, model, grads)


def loss_and_gradients(batch, model: HNNModel):
    """Mean softmax cross-entropy and gradients over a batch.

    batch: list of (EncodedMicroTable, label).  Gradients cover every
    parameter, including the shared GRU/attention weights of the cell
    embedder.
    """
    if not batch:
        raise ValueError("empty batch")
    grads = model.zero_grads()
    n = len(batch)
    loss = 0.0
    for enc, label in batch:
        _, y, cache = forward_encoded(enc, model)
        loss += -np.log(max(y[label], 1e-300))
        dlogits = y.copy()
        dlogits[label] -= 1.0
        _backward(dlogits / n, cache, model, grads)
    return loss / n, grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train(samples, train_cfg: TrainConfig, model: HNNModel,
          emb: EmbeddingTable, log=None):
    """Adam on softmax cross-entropy; deterministic under a fixed seed.

    samples: list of sampler.Sample.  Returns the per-epoch mean losses.
    """
    if not samples:
        raise ValueError("no training samples")
    encoded = [(encode_micro_table(s.micro_table, emb, model.cfg), s.label)
               for s in samples]
    rng = np.random.RandomState(train_cfg.seed)
    adam_m = model.zero_grads()
    adam_v = model.zero_grads()
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    losses = []
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(encoded))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(encoded), train_cfg.batch_size):
            batch = [encoded[i] for i in order[start:start + train_cfg.batch_size]]
            loss, grads = loss_and_gradients(batch, model)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    "loss is not finite at epoch %d" % epoch)
            step += 1
            for name in model.params:
                g = grads[name]
                adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * g
                adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * g * g
                m_hat = adam_m[name] / (1 - beta1 ** step)
                v_hat = adam_v[name] / (1 - beta2 ** step)
                model.params[name] -= (train_cfg.learning_rate * m_hat
                                       / (np.sqrt(v_hat) + eps))
            epoch_loss += loss
            n_batches += 1
        losses.append(epoch_loss / n_batches)
        if log is not None:
            log("epoch %d/%d loss %.6f"
                % (epoch + 1, train_cfg.epochs, losses[-1]))
    return losses


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

_MAGIC = b"TABSEMA-HNN\n"


def save_checkpoint(model: HNNModel, path, catalog_hash_value=""):
    """Write a self-describing checkpoint: JSON header + raw float64 blocks."""
    names = model.param_names()
    header = {
        "version": CHECKPOINT_VERSION,
        "dtype": "<f8",
        "catalog_hash": catalog_hash_value,
        "config": asdict(model.cfg),
        "params": [[name, list(model.params[name].shape)] for name in names],
    }
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        for name in names:
            f.write(np.ascontiguousarray(
                model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (model, catalog_hash)."""
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise CheckpointError("not a model checkpoint: %s" % path)
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError("corrupt checkpoint header") from exc
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError("checkpoint version %r not supported"
                                  % header.get("version"))
        cfg_dict = dict(header["config"])
        cfg_dict["theta1"] = tuple(cfg_dict["theta1"])
        cfg_dict["theta2"] = tuple(cfg_dict["theta2"])
        cfg = HNNConfig(**cfg_dict)
        params = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError("truncated parameter block: %s" % name)
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if f.read(1):
            raise CheckpointError("trailing bytes after parameter blocks")
    return HNNModel(cfg, params), header["catalog_hash"]
