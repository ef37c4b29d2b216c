"""Networks and training for health-index estimation.

Four model families share one training entry point:

* causal autoencoder: the encoder reads sensor windows only and compresses
  each window to a single latent scalar; the decoder reconstructs the sensors
  from that scalar (broadcast over time) concatenated with the operating
  conditions. Temporal soft constraints act on the latent batch.
* residual autoencoder / residual regression: plain convolutional stacks
  trained on healthy early-life windows to reproduce the sensors.
* supervised: convolutional regressor from (sensors, conditions) windows to a
  health label.

Losses are plain tensor functions so their gradients can be checked against
finite differences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .ingest import WindowSet
from .weibull import WeibullFit, g_of_t

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "fleethi-ckpt-1"
KINDS = ("proposed_ae", "residual_ae", "residual_reg", "supervised")
CONSTRAINTS = ("none", "correlation", "negative_gradient", "functional")


class TrainingError(Exception):
    pass


@dataclass
class NetworkSpec:
    kind: str = "proposed_ae"
    encoder_filters: tuple[int, ...] = (128, 64, 16)
    decoder_filters: tuple[int, ...] = (16, 64, 128)
    kernel: int = 11
    residual_filters: int = 64
    residual_layers: int = 4
    pool: int = 2
    # ablation variant: feed operating conditions into the encoder as well
    symmetric_inputs: bool = False

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 20
    learning_rate: float = 1e-4
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ConstraintSpec:
    kind: str = "none"
    lam: float = 1.0
    expected_hi: WeibullFit | None = None

    def validate(self):
        if self.kind not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}")
        if self.lam < 0:
            raise ValueError("constraint weight must be >= 0")
        if self.kind == "functional" and self.expected_hi is None:
            raise TrainingError("functional constraint requires a fitted expected-HI curve")


# paper-scale hyperparameter presets for the two case-study datasets
PRESETS = {
    ("turbofan", "supervised"): TrainConfig(epochs=20, batch_size=512, learning_rate=1e-4),
    ("turbofan", "residual"): TrainConfig(epochs=20, batch_size=512, learning_rate=1e-4),
    ("turbofan", "proposed"): TrainConfig(epochs=20, batch_size=20, learning_rate=1e-4),
    ("battery", "supervised"): TrainConfig(epochs=20, batch_size=1024, learning_rate=1e-4),
    ("battery", "residual"): TrainConfig(epochs=20, batch_size=1024, learning_rate=1e-4),
    ("battery", "proposed"): TrainConfig(epochs=20, batch_size=128, learning_rate=1e-4),
}
PRESET_WINDOW = {("turbofan", "supervised"): 50, ("turbofan", "residual"): 50,
                 ("turbofan", "proposed"): 2030, ("battery", "supervised"): 200,
                 ("battery", "residual"): 200, ("battery", "proposed"): 2160}


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

def _conv_stack(c_in: int, filters, kernel: int) -> list[nn.Module]:
    layers = []
    for c_out in filters:
        layers += [nn.Conv1d(c_in, c_out, kernel, padding="same"), nn.ReLU()]
        c_in = c_out
    return layers


class CausalAE(nn.Module):
    """Encoder X -> scalar latent; decoder (latent, W) -> reconstructed X."""

    def __init__(self, spec: NetworkSpec, p: int, k: int, S: int):
        super().__init__()
        self.kind = spec.kind
        self.symmetric = spec.symmetric_inputs
        self.p, self.k, self.S = p, k, S
        enc_in = p + k if self.symmetric else p
        self.encoder = nn.Sequential(*_conv_stack(enc_in, spec.encoder_filters, spec.kernel))
        self.to_latent = nn.Linear(spec.encoder_filters[-1] * S, 1)
        self.decoder = nn.Sequential(*_conv_stack(1 + k, spec.decoder_filters, spec.kernel))
        # per-time-step fully connected output of width p
        self.head = nn.Conv1d(spec.decoder_filters[-1], p, 1)

    def encode(self, x: torch.Tensor, w: torch.Tensor | None = None) -> torch.Tensor:
        inp = torch.cat([x, w], dim=1) if self.symmetric else x
        feats = self.encoder(inp)
        return self.to_latent(feats.flatten(1)).squeeze(-1)

    def decode(self, z: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
        z_track = z.view(-1, 1, 1).expand(-1, 1, w.shape[-1])
        return self.head(self.decoder(torch.cat([z_track, w], dim=1)))

    def forward(self, x: torch.Tensor, w: torch.Tensor):
        z = self.encode(x, w)
        return self.decode(z, w), z


class ResidualNet(nn.Module):
    """Healthy-behavior model: reconstructs X from (X, W) or predicts X from W."""

    def __init__(self, spec: NetworkSpec, p: int, k: int):
        super().__init__()
        self.kind = spec.kind
        self.p, self.k = p, k
        c_in = p + k if spec.kind == "residual_ae" else k
        filters = [spec.residual_filters] * spec.residual_layers
        self.body = nn.Sequential(*_conv_stack(c_in, filters, spec.kernel))
        self.head = nn.Conv1d(spec.residual_filters, p, 1)

    def forward(self, x: torch.Tensor | None, w: torch.Tensor) -> torch.Tensor:
        inp = torch.cat([x, w], dim=1) if self.kind == "residual_ae" else w
        return self.head(self.body(inp))


class SupervisedNet(nn.Module):
    """Conv stack with batch norm and pooling, scalar health output."""

    def __init__(self, spec: NetworkSpec, p: int, k: int, S: int):
        super().__init__()
        self.kind = spec.kind
        self.p, self.k, self.S = p, k, S
        min_S = spec.pool ** spec.residual_layers
        if S < min_S:
            raise ValueError(f"supervised stack needs S >= {min_S}, got {S}")
        layers, c_in, length = [], p + k, S
        for _ in range(spec.residual_layers):
            layers += [nn.Conv1d(c_in, spec.residual_filters, spec.kernel, padding="same"),
                       nn.BatchNorm1d(spec.residual_filters), nn.ReLU(),
                       nn.MaxPool1d(spec.pool)]
            c_in = spec.residual_filters
            length //= spec.pool
        self.body = nn.Sequential(*layers)
        self.head = nn.Linear(spec.residual_filters * length, 1)

    def forward(self, x: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
        feats = self.body(torch.cat([x, w], dim=1))
        return self.head(feats.flatten(1)).squeeze(-1)


def build_network(spec: NetworkSpec, p: int, k: int, S: int,
                  seed: int | None = None) -> nn.Module:
    """Construct a network for p sensors, k conditions, window length S.

    Weight init is torch's fan-in-scaled uniform; pass a seed for
    reproducible construction.
    """
    spec.validate()
    if min(p, k, S) < 1:
        raise ValueError("p, k, S must all be positive")
    if seed is not None:
        torch.manual_seed(seed)
    if spec.kind == "proposed_ae":
        return CausalAE(spec, p, k, S)
    if spec.kind in ("residual_ae", "residual_reg"):
        return ResidualNet(spec, p, k)
    return SupervisedNet(spec, p, k, S)


# ---------------------------------------------------------------------------
# Loss terms
# ---------------------------------------------------------------------------

def loss_reconstruction(x: torch.Tensor, x_hat: torch.Tensor,
                        mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean absolute error over unmasked entries; x is [B, p, S]."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    err = (x - x_hat).abs()
    if mask is None:
        return err.mean()
    m = mask.unsqueeze(1).to(err.dtype)  # [B, 1, S] over channels
    denom = m.sum() * x.shape[1]
    if denom == 0:
        raise TrainingError("reconstruction loss over fully masked batch")
    return (err * m).sum() / denom


def loss_correlation(z: torch.Tensor, t: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """Product-moment correlation of (t, z); minimizing drives it to -1.

    Degenerate batches (constant z or t) return 0 through the epsilon guard.
    """
    if z.numel() < 2:
        raise ValueError("correlation constraint needs at least 2 samples")
    t = t.to(z.dtype)
    zc = z - z.mean()
    tc = t - t.mean()
    num = (tc * zc).sum()
    denom = torch.sqrt((tc * tc).sum() * (zc * zc).sum() + eps)
    return num / denom


def negative_gradient_pairs(t: torch.Tensor, units=None) -> torch.Tensor:
    """Boolean mask of consecutive batch pairs that stay within one unit."""
    n = t.numel()
    if n < 2:
        return torch.zeros(0, dtype=torch.bool)
    same = torch.ones(n - 1, dtype=torch.bool)
    if units is not None:
        ua = np.asarray(units)
        same &= torch.as_tensor(ua[1:] == ua[:-1])
    return same


def loss_negative_gradient(z: torch.Tensor, t: torch.Tensor,
                           units=None) -> torch.Tensor:
    """Mean positive part of the forward difference dZ/dt within each unit.

    Samples must be in cycle order per unit; pairs never straddle units.
    A batch with no valid pair contributes 0 (starvation is counted by the
    trainer).
    """
    pairs = negative_gradient_pairs(t, units)
    if pairs.numel() == 0 or not bool(pairs.any()):
        return z.sum() * 0.0
    t = t.to(z.dtype)
    dz = z[1:] - z[:-1]
    dt = t[1:] - t[:-1]
    slope = dz[pairs] / dt[pairs]
    return torch.relu(slope).mean()


def loss_functional(z: torch.Tensor, t: torch.Tensor, expected) -> torch.Tensor:
    """Mean absolute deviation between the latent and the expected-HI curve.

    expected is a WeibullFit or any callable mapping cycles to expected HI.
    """
    if expected is None:
        raise TrainingError("functional constraint requires an expected-HI curve")
    t_np = t.detach().cpu().numpy()
    g = g_of_t(t_np, expected) if isinstance(expected, WeibullFit) else expected(t_np)
    target = torch.as_tensor(np.asarray(g), dtype=z.dtype, device=z.device)
    return (target - z).abs().mean()


def constraint_loss(constraint: ConstraintSpec, z: torch.Tensor, t: torch.Tensor,
                    units=None) -> torch.Tensor:
    if constraint.kind == "none":
        return z.sum() * 0.0
    if constraint.kind == "correlation":
        return loss_correlation(z, t)
    if constraint.kind == "negative_gradient":
        return loss_negative_gradient(z, t, units)
    return loss_functional(z, t, constraint.expected_hi)


# ---------------------------------------------------------------------------
# Batching and training
# ---------------------------------------------------------------------------

def _to_tensor(a: np.ndarray) -> torch.Tensor:
    # windows come as [n, S, C]; conv layers want [n, C, S]
    return torch.as_tensor(a, dtype=torch.float32).transpose(1, 2).contiguous()


@dataclass
class _Batch:
    x: torch.Tensor | None
    w: torch.Tensor | None
    mask: torch.Tensor
    t: torch.Tensor
    units: np.ndarray
    idx: np.ndarray


def _materialize(ws: WindowSet, idx: np.ndarray) -> _Batch:
    win = ws.windows[idx]
    x = _to_tensor(win[:, :, ws.x_cols]) if len(ws.x_cols) else None
    w = _to_tensor(win[:, :, ws.w_cols]) if len(ws.w_cols) else None
    return _Batch(x=x, w=w,
                  mask=torch.as_tensor(ws.mask[idx]),
                  t=torch.as_tensor(ws.cycles()[idx], dtype=torch.float32),
                  units=np.asarray(ws.unit_ids(), dtype=object)[idx],
                  idx=idx)


def _unit_blocks(ws: WindowSet, batch_size: int) -> list[np.ndarray]:
    """Contiguous per-unit blocks of cycle windows, in cycle order.

    A leftover block of a single window is merged into its predecessor so the
    temporal constraints always see at least one within-unit pair.
    """
    order = {}
    for i, m in enumerate(ws.meta):
        order.setdefault(m.unit_id, []).append(i)
    blocks = []
    for uid, idxs in order.items():
        idxs = sorted(idxs, key=lambda i: ws.meta[i].cycle)
        unit_blocks = [idxs[s:s + batch_size] for s in range(0, len(idxs), batch_size)]
        if len(unit_blocks) > 1 and len(unit_blocks[-1]) < 2:
            unit_blocks[-2].extend(unit_blocks.pop())
        blocks.extend(np.array(b) for b in unit_blocks)
    return blocks


def _plain_batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    perm = rng.permutation(n)
    return [perm[s:s + batch_size] for s in range(0, n, batch_size)]


def train(model: nn.Module, data: WindowSet, constraint: ConstraintSpec | None = None,
          cfg: TrainConfig | None = None, labels: np.ndarray | None = None) -> list[dict]:
    """Train any model kind; returns one history record per epoch.

    The causal autoencoder is fed contiguous blocks of one unit's cycles in
    cycle order (block order shuffled per epoch) so the temporal constraints
    see ordered latents. Other kinds get ordinary shuffled minibatches.
    Supervised training requires per-window labels.
    """
    constraint = constraint or ConstraintSpec()
    cfg = cfg or TrainConfig()
    cfg.validate()
    constraint.validate()
    if data.n_windows == 0:
        raise TrainingError("empty training window set")
    kind = model.kind
    if kind == "supervised":
        if labels is None:
            raise TrainingError("supervised training requires labels")
        labels_t = torch.as_tensor(np.asarray(labels), dtype=torch.float32)
        if labels_t.numel() != data.n_windows:
            raise TrainingError("label count does not match window count")
    if kind != "proposed_ae" and constraint.kind != "none":
        raise TrainingError(f"{kind} does not take a latent constraint")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    history = []
    ng_starved = 0
    model.train()
    for epoch in range(1, cfg.epochs + 1):
        if kind == "proposed_ae":
            blocks = _unit_blocks(data, cfg.batch_size)
            rng.shuffle(blocks)
        else:
            blocks = _plain_batches(data.n_windows, cfg.batch_size, rng)
        tot, tot_mae, tot_con = 0.0, 0.0, 0.0
        for idx in blocks:
            b = _materialize(data, idx)
            if kind == "proposed_ae":
                x_hat, z = model(b.x, b.w)
                l_mae = loss_reconstruction(b.x, x_hat, b.mask)
                if constraint.kind == "negative_gradient" and \
                        not bool(negative_gradient_pairs(b.t, b.units).any()):
                    ng_starved += 1
                if constraint.kind == "correlation" and z.numel() < 2:
                    l_con = torch.zeros(())
                else:
                    l_con = constraint_loss(constraint, z, b.t, b.units)
                loss = l_mae + constraint.lam * l_con
            elif kind in ("residual_ae", "residual_reg"):
                x_hat = model(b.x, b.w)
                l_mae = loss_reconstruction(b.x, x_hat, b.mask)
                l_con = torch.zeros(())
                loss = l_mae
            else:
                pred = model(b.x, b.w)
                l_mae = (pred - labels_t[idx]).abs().mean()
                l_con = torch.zeros(())
                loss = l_mae
            opt.zero_grad()
            loss.backward()
            opt.step()
            tot += loss.item() * len(idx)
            tot_mae += l_mae.item() * len(idx)
            tot_con += l_con.item() * len(idx)
        n = data.n_windows
        history.append({"epoch": epoch, "l_total": tot / n, "l_mae": tot_mae / n,
                        "l_constraint": tot_con / n, "ng_starved_batches": ng_starved})
    model.eval()
    return history


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def _check_channels(model: nn.Module, ws: WindowSet):
    if len(ws.x_cols) and ws.x().shape[2] != model.p:
        raise ValueError(f"window X width {ws.x().shape[2]} != model p {model.p}")
    if len(ws.w_cols) and ws.w().shape[2] != model.k:
        raise ValueError(f"window W width {ws.w().shape[2]} != model k {model.k}")


@torch.no_grad()
def encode(model: CausalAE, ws: WindowSet, batch: int = 256) -> np.ndarray:
    """Latent scalar per window, deterministic in eval mode."""
    if model.kind != "proposed_ae":
        raise ValueError("encode applies to the causal autoencoder")
    _check_channels(model, ws)
    model.eval()
    out = []
    for s in range(0, ws.n_windows, batch):
        b = _materialize(ws, np.arange(s, min(s + batch, ws.n_windows)))
        out.append(model.encode(b.x, b.w).numpy())
    return np.concatenate(out) if out else np.empty(0)


@torch.no_grad()
def reconstruct(model: nn.Module, ws: WindowSet, batch: int = 256) -> np.ndarray:
    """Reconstructed sensor windows, shape [n, S, p]."""
    _check_channels(model, ws)
    model.eval()
    out = []
    for s in range(0, ws.n_windows, batch):
        b = _materialize(ws, np.arange(s, min(s + batch, ws.n_windows)))
        if model.kind == "proposed_ae":
            x_hat, _ = model(b.x, b.w)
        else:
            x_hat = model(b.x, b.w)
        out.append(x_hat.transpose(1, 2).numpy())
    return np.concatenate(out) if out else np.empty((0, ws.S, model.p))


@torch.no_grad()
def predict(model: nn.Module, ws: WindowSet, batch: int = 256) -> np.ndarray:
    """Model outputs: health per window (supervised) or sensors (regression)."""
    if model.kind == "supervised":
        _check_channels(model, ws)
        model.eval()
        out = []
        for s in range(0, ws.n_windows, batch):
            b = _materialize(ws, np.arange(s, min(s + batch, ws.n_windows)))
            out.append(model(b.x, b.w).numpy())
        return np.concatenate(out) if out else np.empty(0)
    if model.kind == "residual_reg":
        return reconstruct(model, ws, batch)
    raise ValueError(f"predict not defined for kind {model.kind!r}")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: nn.Module, path, spec: NetworkSpec, cfg: TrainConfig,
                    dims: tuple[int, int, int], scaler_ref: str | None = None) -> Path:
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "spec": spec,
        "train_config": cfg,
        "dims": dims,
        "scaler_ref": scaler_ref,
        "state_dict": model.state_dict(),
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path) -> tuple[nn.Module, NetworkSpec, TrainConfig, dict]:
    payload = torch.load(path, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format in {path}")
    spec, cfg = payload["spec"], payload["train_config"]
    p, k, S = payload["dims"]
    model = build_network(spec, p, k, S)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    extras = {"scaler_ref": payload.get("scaler_ref"), "dims": payload["dims"]}
    return model, spec, cfg, extras
