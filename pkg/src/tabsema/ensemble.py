"""Base classifiers (LR, MLP) and the two HNN + P2Vec ensemble schemes.

Ensemble I averages the network's score with the score of a classifier
over [mean main-cell word vector, property vector].  Ensemble II trains a
classifier over [FC-layer output of the frozen network, property vector].
"""

import json
from dataclasses import dataclass

import numpy as np

from .encoder import EmbeddingTable, mean_word_vector
from .hnn import HNNModel, encode_micro_table, forward_encoded
from .p2vec import CandidatePropertySet, p2vec_extract
from .tables import MicroTable

INIT_SCALE = 0.08


@dataclass
class BaseTrainConfig:
    learning_rate: float = 0.01
    epochs: int = 300
    batch_size: int = 0  # 0 = full batch
    seed: int = 0


class BaseClassifier:
    """Softmax multi-class classifier: logistic regression or one-hidden-layer MLP."""

    def __init__(self, kind, params, input_dim, k, hidden_size=0):
        if kind not in ("lr", "mlp"):
            raise ValueError("kind must be 'lr' or 'mlp'")
        self.kind = kind
        self.params = params
        self.input_dim = input_dim
        self.k = k
        self.hidden_size = hidden_size

    @classmethod
    def init(cls, kind, input_dim, k, hidden_size=64, seed=0):
        rng = np.random.RandomState(seed)

        def u(*shape):
            return rng.uniform(-INIT_SCALE, INIT_SCALE, shape)

        if kind == "lr":
            params = {"w": u(input_dim, k), "b": u(k)}
            hidden_size = 0
        else:
            params = {"w1": u(input_dim, hidden_size), "b1": u(hidden_size),
                      "w2": u(hidden_size, k), "b2": u(k)}
        return cls(kind, params, input_dim, k, hidden_size)

    def _forward(self, x):
        if self.kind == "lr":
            return x @ self.params["w"] + self.params["b"], None
        h = np.tanh(x @ self.params["w1"] + self.params["b1"])
        return h @ self.params["w2"] + self.params["b2"], h

    def predict_proba(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise ValueError("input dimension %d, classifier expects %d"
                             % (x.shape[1], self.input_dim))
        logits, _ = self._forward(x)
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        proba = e / e.sum(axis=1, keepdims=True)
        return proba[0] if single else proba

    def predict(self, x):
        proba = self.predict_proba(np.atleast_2d(np.asarray(x)))
        return np.argmax(proba, axis=1)


def train_base(inputs, kind, k, hidden_size=64,
               cfg: BaseTrainConfig = None) -> BaseClassifier:
    """Train a base classifier by Adam on softmax cross-entropy; seeded."""
    if not inputs:
        raise ValueError("no training inputs")
    cfg = cfg or BaseTrainConfig()
    x = np.asarray([np.asarray(v, dtype=np.float64) for v, _ in inputs])
    labels = np.asarray([lbl for _, lbl in inputs], dtype=np.int64)
    if x.ndim != 2:
        raise ValueError("inconsistent input dimensions")
    n, d = x.shape
    clf = BaseClassifier.init(kind, d, k, hidden_size, cfg.seed)

    adam_m = {name: np.zeros_like(p) for name, p in clf.params.items()}
    adam_v = {name: np.zeros_like(p) for name, p in clf.params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    rng = np.random.RandomState(cfg.seed)
    batch = cfg.batch_size if cfg.batch_size > 0 else n
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            xb, yb = x[idx], labels[idx]
            logits, hid = clf._forward(xb)
            logits = logits - logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            proba = e / e.sum(axis=1, keepdims=True)
            dlogits = proba.copy()
            dlogits[np.arange(len(yb)), yb] -= 1.0
            dlogits /= len(yb)
            grads = {}
            if clf.kind == "lr":
                grads["w"] = xb.T @ dlogits
                grads["b"] = dlogits.sum(axis=0)
            else:
                grads["w2"] = hid.T @ dlogits
                grads["b2"] = dlogits.sum(axis=0)
                dh = (dlogits @ clf.params["w2"].T) * (1.0 - hid ** 2)
                grads["w1"] = xb.T @ dh
                grads["b1"] = dh.sum(axis=0)
            step += 1
            for name, g in grads.items():
                adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * g
                adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * g * g
                m_hat = adam_m[name] / (1 - beta1 ** step)
                v_hat = adam_v[name] / (1 - beta2 ** step)
                clf.params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return clf


# ---------------------------------------------------------------------------
# Feature builders shared by training and scoring
# ---------------------------------------------------------------------------

def model_fingerprint(model: HNNModel) -> str:
    """Content hash of an HNN model (config + parameter bytes)."""
    import hashlib
    from dataclasses import asdict

    digest = hashlib.sha256(json.dumps(asdict(model.cfg),
                                       sort_keys=True, default=list).encode())
    for name in model.param_names():
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(model.params[name], "<f8").tobytes())
    return digest.hexdigest()


def main_cell_p2vec_features(mt: MicroTable, emb: EmbeddingTable, t_len, v):
    """Ensemble I input: [mean word vector of the main cell, property vector]."""
    return np.concatenate([mean_word_vector(mt.main_cell.raw_text, emb, t_len), v])


def fhnn_p2vec_features(mt: MicroTable, model: HNNModel, emb: EmbeddingTable, v):
    """Ensemble II input: [FC output of the frozen network, property vector]."""
    enc = encode_micro_table(mt, emb, model.cfg)
    f_hnn, _, _ = forward_encoded(enc, model)
    return np.concatenate([f_hnn, v])


# ---------------------------------------------------------------------------
# Ensemble models
# ---------------------------------------------------------------------------

@dataclass
class EnsembleModel:
    mode: str  # "I" or "II"
    base: BaseClassifier
    hnn_ref: str  # fingerprint of the HNN the base was trained against

    def __post_init__(self):
        if self.mode not in ("I", "II"):
            raise ValueError("mode must be 'I' or 'II'")


class FeatureDriftError(RuntimeError):
    """The HNN at scoring time differs from the one the base was trained on."""


def ensemble1_score(mt: MicroTable, model_hnn: HNNModel, ens: EnsembleModel,
                    emb: EmbeddingTable, props: CandidatePropertySet, kb,
                    n, alpha):
    """Average of the network score and the P2Vec-classifier score."""
    if ens.mode != "I":
        raise ValueError("ensemble model is not mode I")
    enc = encode_micro_table(mt, emb, model_hnn.cfg)
    _, y_hnn, _ = forward_encoded(enc, model_hnn)
    v = p2vec_extract(mt, props, n, alpha, kb)
    x = main_cell_p2vec_features(mt, emb, model_hnn.cfg.t_len, v)
    y_p2vec = ens.base.predict_proba(x)
    return (y_hnn + y_p2vec) / 2.0


def ensemble2_score(mt: MicroTable, model_hnn: HNNModel, ens: EnsembleModel,
                    emb: EmbeddingTable, props: CandidatePropertySet, kb,
                    n, alpha):
    """Classifier over the frozen network's FC output plus the property vector."""
    if ens.mode != "II":
        raise ValueError("ensemble model is not mode II")
    if ens.hnn_ref and ens.hnn_ref != model_fingerprint(model_hnn):
        raise FeatureDriftError(
            "HNN fingerprint differs from the one used to train the ensemble")
    v = p2vec_extract(mt, props, n, alpha, kb)
    x = fhnn_p2vec_features(mt, model_hnn, emb, v)
    return ens.base.predict_proba(x)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_base(clf: BaseClassifier, path):
    meta = {"kind": clf.kind, "input_dim": clf.input_dim, "k": clf.k,
            "hidden_size": clf.hidden_size}
    np.savez(path, meta=json.dumps(meta),
             **{"param_" + k: v for k, v in clf.params.items()})


def load_base(path) -> BaseClassifier:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        params = {k[len("param_"):]: data[k] for k in data.files
                  if k.startswith("param_")}
    return BaseClassifier(meta["kind"], params, meta["input_dim"], meta["k"],
                          meta["hidden_size"])


def save_ensemble(ens: EnsembleModel, path):
    meta = {"mode": ens.mode, "kind": ens.base.kind,
            "input_dim": ens.base.input_dim, "k": ens.base.k,
            "hidden_size": ens.base.hidden_size, "hnn_ref": ens.hnn_ref}
    np.savez(path, meta=json.dumps(meta),
             **{"param_" + k: v for k, v in ens.base.params.items()})


def load_ensemble(path) -> EnsembleModel:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        params = {k[len("param_"):]: data[k] for k in data.files
                  if k.startswith("param_")}
    base = BaseClassifier(meta["kind"], params, meta["input_dim"], meta["k"],
                          meta["hidden_size"])
    return EnsembleModel(meta["mode"], base, meta["hnn_ref"])
