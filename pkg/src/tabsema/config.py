"""Run configuration: all hyperparameters, INI-style config files, fingerprints."""

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields


@dataclass
class RunConfig:
    # micro table shape
    m: int = 5
    l: int = 4
    t_len: int = 10
    # network
    hidden: int = 150
    attn_size: int = 50
    theta1: tuple = (2, 3, 4)
    theta2: tuple = (2, 3)
    kappa1: int = 32
    kappa2: int = 32
    fc_size: int = 100
    fc_equals_logits: bool = True
    use_att_birnn: bool = True
    use_conv_column: bool = True
    use_conv_row: bool = True
    # property mining / lookup
    sigma: float = 0.005
    n_lookup: int = 5
    alpha: float = 0.85
    # training
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    base_kind: str = "lr"
    base_hidden: int = 64
    base_epochs: int = 300
    # data split
    train_fraction: float = 0.7

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def hnn_config(self, k: int, d_w: int):
        from .hnn import HNNConfig

        return HNNConfig(
            m=self.m, l=self.l, t_len=self.t_len, hidden=self.hidden,
            attn_size=self.attn_size, theta1=self.theta1, theta2=self.theta2,
            kappa1=self.kappa1, kappa2=self.kappa2, d_w=d_w, k=k,
            fc_size=self.fc_size, fc_equals_logits=self.fc_equals_logits,
            use_att_birnn=self.use_att_birnn,
            use_conv_column=self.use_conv_column,
            use_conv_row=self.use_conv_row)


_TUPLE_FIELDS = {"theta1", "theta2"}
_BOOL_FIELDS = {"fc_equals_logits", "use_att_birnn", "use_conv_column",
                "use_conv_row"}


def _coerce(name, ftype, raw):
    raw = raw.strip()
    if name in _TUPLE_FIELDS:
        return tuple(int(x) for x in raw.replace(",", " ").split())
    if name in _BOOL_FIELDS:
        return raw.lower() in ("1", "true", "yes", "on")
    if ftype is int:
        return int(raw)
    if ftype is float:
        return float(raw)
    return raw


def load_config(path) -> RunConfig:
    """Read an INI-style key=value file; a [run] section header is optional."""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser()
    parser.read_string(text)
    section = parser[parser.sections()[0]]
    known = {f.name: f.type for f in fields(RunConfig)}
    type_map = {"int": int, "float": float, "str": str, "tuple": tuple}
    kwargs = {}
    for key, raw in section.items():
        if key not in known:
            raise KeyError("unknown config key: %s" % key)
        ftype = known[key]
        ftype = type_map.get(ftype, ftype) if isinstance(ftype, str) else ftype
        kwargs[key] = _coerce(key, ftype, raw)
    return RunConfig(**kwargs)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Flag overrides win over the config file."""
    values = asdict(cfg)
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["theta1"] = tuple(values["theta1"])
    values["theta2"] = tuple(values["theta2"])
    return RunConfig(**values)
