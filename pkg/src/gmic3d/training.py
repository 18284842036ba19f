"""Optimization of the two-stage model under the composite loss.

The loss sums per-class binary cross-entropies of the global and local
predictions separately (averaging the predictions before a single BCE makes
one module go slack) plus an L1 sparsity penalty on the saliency maps.
Augmentation is xy shift/resize applied identically to all slices; the same
augmentation drives test-time averaging.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import torch
from scipy import ndimage

from .config import ModelConfig, TrainConfig, config_to_dict
from .container import save_arrays, load_arrays, FormatError
from .metrics import auc
from .model import Gmic3d

PROB_EPS = 1e-7  # BCE clamp; p_local can saturate, saliency pooling cannot


class DivergenceError(RuntimeError):
    pass


def bce(y, p):
    """Binary cross-entropy with probability clamped to [eps, 1-eps]."""
    p = torch.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))


def loss(y, p_global, p_local, saliency, beta):
    """Composite training loss for one volume.

    `y` is a length-2 {0,1} tensor [benign, malignant]; `saliency` is the
    (h, w, D, 2) map. The two BCE terms stay separate by design.
    """
    if not (
        torch.isfinite(p_global).all()
        and torch.isfinite(p_local).all()
        and torch.isfinite(saliency).all()
    ):
        raise DivergenceError("non-finite values reached the loss")
    total = (bce(y, p_local) + bce(y, p_global)).sum()
    total = total + beta * saliency.abs().sum()
    return total


def augment(voxels, rng, shift_limit=6, resize_limit=0.06):
    """Random xy shift and resize, identical on every slice.

    Shift is integer pixels with zero fill; resize rescales the xy plane and
    center-crops/pads back to the original size. Zero limits give the
    identity. Labels and group structure are untouched (the caller keeps
    them).
    """
    voxels = np.asarray(voxels)
    h, w, _ = voxels.shape
    out = voxels
    if resize_limit > 0:
        scale = 1.0 + rng.uniform(-resize_limit, resize_limit)
        if scale != 1.0:
            zoomed = ndimage.zoom(out, (scale, scale, 1.0), order=1)
            out = _fit_xy(zoomed, h, w)
    if shift_limit > 0:
        dy = int(rng.integers(-shift_limit, shift_limit + 1))
        dx = int(rng.integers(-shift_limit, shift_limit + 1))
        out = shift_xy(out, dy, dx)
    return np.clip(out, 0.0, 1.0).astype(voxels.dtype, copy=False)


def shift_xy(voxels, dy, dx):
    """Translate the xy plane by (dy, dx), filling exposed borders with zeros."""
    h, w, d = voxels.shape
    out = np.zeros_like(voxels)
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[ys, xs] = voxels[ys_src, xs_src]
    return out


def _fit_xy(voxels, h, w):
    """Center-crop or zero-pad the xy plane to (h, w)."""
    hh, ww, d = voxels.shape
    out = np.zeros((h, w, d), dtype=voxels.dtype)
    y0 = max((hh - h) // 2, 0)
    x0 = max((ww - w) // 2, 0)
    ty = max((h - hh) // 2, 0)
    tx = max((w - ww) // 2, 0)
    ch = min(h, hh)
    cw = min(w, ww)
    out[ty : ty + ch, tx : tx + cw] = voxels[y0 : y0 + ch, x0 : x0 + cw]
    return out


# --- hyperparameter search -------------------------------------------------

SEARCH_SPACE = {
    "3d": {
        "log10_eta": (-5.5, -4.5),
        "log10_omega": (-3.0, -2.0),
        "t": (10.97, 274.25),
        "k_choices": (8, 12, 16),
        "log10_beta": (-6.54, -4.54),
    },
    "2d": {
        "log10_eta": (-5.5, -4.5),
        "log10_omega": (-3.0, -2.0),
        "t": (1.0, 25.0),
        "k_choices": (4, 6, 8),
        "log10_beta": (-5.5, -3.5),
    },
}


def sample_hyperparameters(rng, mode="3d"):
    """Draw one random-search trial from the documented distributions.

    Returns a dict with keys ``learning_rate``, ``init_weight``,
    ``pool_percent``, ``n_patches``, ``beta``.
    """
    if mode not in SEARCH_SPACE:
        raise ValueError(f"mode must be one of {sorted(SEARCH_SPACE)}")
    space = SEARCH_SPACE[mode]
    return {
        "learning_rate": 10.0 ** rng.uniform(*space["log10_eta"]),
        "init_weight": 10.0 ** rng.uniform(*space["log10_omega"]),
        "pool_percent": rng.uniform(*space["t"]),
        "n_patches": int(rng.choice(space["k_choices"])),
        "beta": 10.0 ** rng.uniform(*space["log10_beta"]),
    }


def apply_hyperparameters(model_cfg, train_cfg, hp):
    model_cfg = replace(
        model_cfg,
        init_weight=hp["init_weight"],
        pool_percent=hp["pool_percent"],
        n_patches=hp["n_patches"],
    )
    train_cfg = replace(
        train_cfg, learning_rate=hp["learning_rate"], beta=hp["beta"]
    )
    return model_cfg, train_cfg


# --- checkpoints ------------------------------------------------------------


@dataclass
class Checkpoint:
    model_state: dict          # name -> np.ndarray
    optimizer_state: dict      # name -> np.ndarray (flattened Adam moments)
    epoch: int
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    history: list              # per-epoch validation malignant AUC
    torch_rng: np.ndarray      # uint8 snapshot of the torch RNG state
    loss_history: list = None  # per-epoch mean training loss

    def save(self, path):
        arrays = {}
        for name, arr in self.model_state.items():
            arrays[f"model/{name}"] = arr
        for name, arr in self.optimizer_state.items():
            arrays[f"opt/{name}"] = arr
        arrays["rng/torch"] = self.torch_rng
        meta = {
            "kind": "checkpoint",
            "epoch": self.epoch,
            "history": self.history,
            "loss_history": self.loss_history or [],
            "model_cfg": config_to_dict(self.model_cfg),
            "train_cfg": config_to_dict(self.train_cfg),
        }
        save_arrays(path, arrays, meta)

    @classmethod
    def load(cls, path):
        meta, arrays = load_arrays(path)
        if meta.get("kind") != "checkpoint":
            raise FormatError(f"{path}: not a checkpoint container")
        mc = meta["model_cfg"]
        from .config import GlobalBackboneConfig

        model_cfg = ModelConfig(
            global_backbone=GlobalBackboneConfig(
                widths=tuple(mc["global_backbone"]["widths"]),
                strides=tuple(mc["global_backbone"]["strides"]),
                norm_groups=mc["global_backbone"]["norm_groups"],
            ),
            **{
                k: (tuple(v) if isinstance(v, list) else v)
                for k, v in mc.items()
                if k != "global_backbone"
            },
        )
        train_cfg = TrainConfig(**meta["train_cfg"])
        model_state = {
            k[len("model/"):]: v for k, v in arrays.items() if k.startswith("model/")
        }
        opt_state = {
            k[len("opt/"):]: v for k, v in arrays.items() if k.startswith("opt/")
        }
        return cls(
            model_state=model_state,
            optimizer_state=opt_state,
            epoch=meta["epoch"],
            model_cfg=model_cfg,
            train_cfg=train_cfg,
            history=meta["history"],
            torch_rng=arrays["rng/torch"],
            loss_history=meta.get("loss_history", []),
        )

    def build_model(self):
        model = Gmic3d(self.model_cfg)
        state = {
            name: torch.as_tensor(arr.copy()) for name, arr in self.model_state.items()
        }
        model.load_state_dict(state)
        model.eval()
        return model


def _snapshot_model(model, optimizer, epoch, model_cfg, train_cfg, history,
                    loss_history=None):
    model_state = {
        name: t.detach().cpu().numpy().copy()
        for name, t in model.state_dict().items()
    }
    opt_state = {}
    if optimizer is not None:
        flat = optimizer.state_dict()["state"]
        for pid, st in flat.items():
            for key, val in st.items():
                if isinstance(val, torch.Tensor):
                    opt_state[f"{pid}.{key}"] = val.detach().cpu().numpy().copy()
                else:
                    opt_state[f"{pid}.{key}"] = np.asarray([val], dtype=np.float64)
    return Checkpoint(
        model_state=model_state,
        optimizer_state=opt_state,
        epoch=epoch,
        model_cfg=model_cfg,
        train_cfg=train_cfg,
        history=list(history),
        torch_rng=torch.get_rng_state().numpy().copy(),
        loss_history=list(loss_history or []),
    )


# --- training loop ----------------------------------------------------------


def split_by_group(volumes, val_fraction, rng):
    """Group-stratified split: both views of a group land on the same side."""
    groups = sorted({v.group_id for v in volumes})
    groups = list(rng.permutation(groups))
    n_val = max(1, int(round(val_fraction * len(groups))))
    val_groups = set(groups[:n_val])
    train = [v for v in volumes if v.group_id not in val_groups]
    val = [v for v in volumes if v.group_id in val_groups]
    return train, val


def _labels(volume):
    return torch.tensor([volume.y_benign, volume.y_malignant], dtype=torch.float32)


def _predict(model, volume):
    with torch.no_grad():
        out = model(torch.from_numpy(np.asarray(volume.voxels, dtype=np.float32)))
    return out["p_final"].numpy()


def validation_auc(model, volumes):
    """Image-wise malignant AUC of p_final on a held-out set."""
    model.eval()
    scores = np.array([_predict(model, v)[1] for v in volumes])
    labels = np.array([v.y_malignant for v in volumes])
    if labels.min() == labels.max():
        return 0.5
    return auc(scores, labels)


def train(volumes, model_cfg=None, train_cfg=None, init_from=None, log=None,
          accumulation_order="forward"):
    """Train on phantom volumes; returns the checkpoint with the best
    validation malignant AUC.

    Deterministic given ``train_cfg.seed`` (single logical schedule). The
    ground-truth masks are never consulted: only voxels and labels are read.
    Divergence (non-finite loss) aborts with the last good checkpoint.

    `accumulation_order` ("forward" or "reversed") controls the order in
    which per-volume gradients are accumulated within a batch; reordering
    stands in for data-parallel accumulation and must leave the epoch loss
    within 1e-5 relative of the forward schedule.
    """
    model_cfg = model_cfg or ModelConfig()
    train_cfg = train_cfg or TrainConfig()
    model_cfg.validate()
    train_cfg.validate()

    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    model = Gmic3d(model_cfg)
    if init_from is not None:
        load_pretrained_backbone(model, init_from)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)

    train_set, val_set = split_by_group(volumes, train_cfg.val_fraction, rng)
    if not any(v.y_malignant for v in train_set) or not any(
        v.y_benign for v in train_set
    ):
        raise ValueError("training set must contain positives for both classes")

    if accumulation_order not in ("forward", "reversed"):
        raise ValueError("accumulation_order must be 'forward' or 'reversed'")

    history = []
    loss_history = []
    best = None
    best_auc = -math.inf
    stale = 0
    last_good = _snapshot_model(model, optimizer, 0, model_cfg, train_cfg, history)

    for epoch in range(train_cfg.max_epochs):
        model.train()
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), train_cfg.batch_size):
            batch_idx = order[start : start + train_cfg.batch_size]
            # augmentation and jitter use per-volume streams drawn in the
            # canonical order, so accumulation order changes only the order
            # of gradient additions
            prepared = []
            for i in batch_idx:
                vol = train_set[i]
                vol_rng = np.random.default_rng(
                    [train_cfg.seed, epoch, int(i)]
                )
                voxels = augment(
                    vol.voxels, vol_rng, train_cfg.shift_limit, train_cfg.resize_limit
                )
                x = torch.from_numpy(np.ascontiguousarray(voxels, dtype=np.float32))
                prepared.append((x, _labels(vol), vol_rng))
            if accumulation_order == "reversed":
                prepared = prepared[::-1]

            optimizer.zero_grad()
            batch_loss = 0.0
            for x, y, vol_rng in prepared:
                try:
                    out = model(x, rng=vol_rng)
                    vol_loss = loss(
                        y,
                        out["p_global"],
                        out["p_local"],
                        out["saliency"],
                        train_cfg.beta,
                    )
                except DivergenceError:
                    if log:
                        log(f"divergence at epoch {epoch}; returning last good state")
                    return last_good
                (vol_loss / len(prepared)).backward()
                batch_loss += float(vol_loss.detach()) / len(prepared)
            optimizer.step()
            epoch_loss += batch_loss
            n_batches += 1
        epoch_loss /= max(n_batches, 1)
        if not math.isfinite(epoch_loss):
            if log:
                log(f"divergence at epoch {epoch}; returning last good state")
            return last_good
        loss_history.append(epoch_loss)

        val_auc = validation_auc(model, val_set)
        history.append(val_auc)
        last_good = _snapshot_model(
            model, optimizer, epoch + 1, model_cfg, train_cfg, history, loss_history
        )
        if log:
            log(
                f"epoch {epoch + 1}/{train_cfg.max_epochs} "
                f"loss {epoch_loss:.4f} val-auc(M) {val_auc:.4f}"
            )
        if val_auc > best_auc:
            best_auc = val_auc
            best = last_good
            stale = 0
        else:
            stale += 1
            if stale > train_cfg.patience:
                break
    result = best if best is not None else last_good
    # weights/optimizer come from the best epoch; the histories describe the
    # whole run so callers can inspect the full loss trajectory
    result.history = list(history)
    result.loss_history = list(loss_history)
    return result


def predict_tta(volume, model, train_cfg, n=10, rng=None):
    """Mean fused prediction over `n` random augmentations."""
    rng = rng or np.random.default_rng(0)
    model.eval()
    preds = []
    for _ in range(n):
        voxels = augment(
            volume.voxels, rng, train_cfg.shift_limit, train_cfg.resize_limit
        )
        x = torch.from_numpy(np.ascontiguousarray(voxels, dtype=np.float32))
        with torch.no_grad():
            preds.append(model(x)["p_final"].numpy())
    return np.mean(preds, axis=0)


# --- auxiliary pretraining --------------------------------------------------


def coarse_label(volume):
    """3-way auxiliary label: 2 if malignant, 1 if benign only, else 0."""
    if volume.y_malignant:
        return 2
    return 1 if volume.y_benign else 0


def pretrain_global(volumes, model_cfg, epochs=2, lr=1e-3, seed=0, log=None):
    """Train the global backbone on the coarse 3-way phantom task.

    Stand-in for risk-category pretraining: slice-wise backbone, mean-pooled
    hidden state, linear 3-way head with cross-entropy. Returns a state dict
    for :func:`load_pretrained_backbone`.
    """
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    backbone = GlobalNetworkOnly(model_cfg)
    optimizer = torch.optim.Adam(backbone.parameters(), lr=lr)
    ce = torch.nn.CrossEntropyLoss()
    for epoch in range(epochs):
        order = rng.permutation(len(volumes))
        total = 0.0
        for i in order:
            vol = volumes[i]
            x = torch.from_numpy(np.asarray(vol.voxels, dtype=np.float32))
            optimizer.zero_grad()
            logits = backbone(x)
            l = ce(logits.unsqueeze(0), torch.tensor([coarse_label(vol)]))
            l.backward()
            optimizer.step()
            total += float(l.detach())
        if log:
            log(f"pretrain epoch {epoch + 1}/{epochs} loss {total / len(volumes):.4f}")
    return {
        name: t.detach().numpy().copy()
        for name, t in backbone.global_net.state_dict().items()
    }


class GlobalNetworkOnly(torch.nn.Module):
    def __init__(self, model_cfg):
        super().__init__()
        from .model import GlobalNetwork

        self.global_net = GlobalNetwork(model_cfg.global_backbone)
        self.head = torch.nn.Linear(self.global_net.out_channels, 3)

    def forward(self, voxels):
        hidden = self.global_net(voxels)       # (h, w, D, c)
        return self.head(hidden.mean(dim=(0, 1, 2)))


def load_pretrained_backbone(model, backbone_state):
    """Copy pretrained global-backbone weights into a full model."""
    state = {
        name: torch.as_tensor(arr.copy()) for name, arr in backbone_state.items()
    }
    model.global_net.load_state_dict(state)
