"""EchoScan-mini: residual 1-D conv encoder, SP/GeM multi-aggregation, and a
dual-head decoder producing floorplan-image and height-vector logits."""
from dataclasses import asdict, dataclass

import numpy as np

from echolab.errors import NegativeFeature, ShapeMismatch
from echolab.tensor import core
from echolab.tensor.core import Tensor
from echolab.tensor.nn import ChannelNorm, Conv1d, Conv2d, Linear, Module

AGGREGATION_MODES = ("SP", "GeM", "SP+GeM")


@dataclass
class EchoScanConfig:
    M: int = 6
    N: int = 1024
    stem_channels: int = 16
    stages: tuple = ((32, 4), (64, 4), (128, 4), (256, 4))
    kernel: int = 7
    b_out: int = 100
    h_out: int = 40
    aggregation_mode: str = "SP+GeM"
    rho_gem: float = 3.0
    decoder_channels: tuple = (64, 32, 16, 8)
    decoder_blocks: int = 0  # 0 = pick from b_out
    skip_channels: int = 4
    skip_pool: int = 4
    seed: int = 0

    def __post_init__(self):
        self.stages = tuple(tuple(s) for s in self.stages)
        self.decoder_channels = tuple(self.decoder_channels)
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise ValueError(f"aggregation_mode must be one of {AGGREGATION_MODES}")
        if self.latent_length < 1:
            raise ValueError(f"N={self.N} too short for strides {[s for _, s in self.stages]}")

    @property
    def latent_length(self) -> int:
        L = self.N
        for _, stride in self.stages:
            L = (L - 1) // stride + 1
        return L

    @property
    def channels(self) -> int:
        return self.stages[-1][0]

    @property
    def latent_width(self) -> int:
        return 2 * self.channels if self.aggregation_mode == "SP+GeM" else self.channels

    @property
    def n_decoder_blocks(self) -> int:
        if self.decoder_blocks:
            return self.decoder_blocks
        for n in (3, 2, 1):
            if self.b_out % (2 ** n) == 0 and self.b_out // (2 ** n) >= 2:
                return n
        return 0

    def to_dict(self):
        d = asdict(self)
        d["stages"] = [list(s) for s in self.stages]
        d["decoder_channels"] = list(self.decoder_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def full_profile(**overrides) -> EchoScanConfig:
    return EchoScanConfig(**overrides)


def desk_profile(**overrides) -> EchoScanConfig:
    """Small CPU profile: N=512, 32x32 floorplan, 16-pixel height."""
    kw = dict(N=512, stem_channels=8, stages=((16, 4), (32, 4), (64, 4), (64, 2)), b_out=32, h_out=16,
              decoder_channels=(32, 16, 16, 8))
    kw.update(overrides)
    return EchoScanConfig(**kw)


# ---------------------------------------------------------------------------
# multi-aggregation


def aggregate(F, rho):
    """Generalized mean over the last axis: (mean f^rho)^(1/rho) per channel.

    rho=1 is plain averaging (SP), rho=3 is GeM, large rho tends to max.
    Accepts a Tensor (differentiable) or an array (returns an array).
    """
    as_array = not isinstance(F, Tensor)
    t = Tensor(np.asarray(F, dtype=np.float64)) if as_array else F
    if rho == 1:
        out = core.mean(t, axis=-1)
    else:
        if np.any(t.data < 0):
            raise NegativeFeature("generalized mean with rho != 1 needs non-negative features")
        out = core.power_mean(t, rho, axis=-1)
    return out.data if as_array else out


def assemble_descriptor(F, mode="SP+GeM", rho_gem=3.0):
    if mode == "SP":
        return aggregate(F, 1)
    if mode == "GeM":
        return aggregate(F, rho_gem)
    if mode == "SP+GeM":
        sp, gem = aggregate(F, 1), aggregate(F, rho_gem)
        if isinstance(sp, Tensor):
            return core.concat([sp, gem], axis=-1)
        return np.concatenate([sp, gem], axis=-1)
    raise ValueError(f"unknown aggregation mode {mode!r}")


# ---------------------------------------------------------------------------
# network


class ResBlock1d(Module):
    def __init__(self, c_in, c_out, stride, kernel, rng):
        self.conv_a = Conv1d(c_in, c_out, kernel, rng, stride=stride)
        self.norm_a = ChannelNorm(c_out)
        self.conv_b = Conv1d(c_out, c_out, 3, rng)
        self.norm_b = ChannelNorm(c_out)
        self.shortcut = Conv1d(c_in, c_out, 1, rng, stride=stride, padding=0)

    def forward(self, x):
        h = core.relu(self.norm_a(self.conv_a(x)))
        h = self.norm_b(self.conv_b(h))
        return core.relu(h + self.shortcut(x))


class Encoder(Module):
    def __init__(self, cfg: EchoScanConfig, rng):
        self.stem = Conv1d(cfg.M, cfg.stem_channels, cfg.kernel, rng)
        self.stem_norm = ChannelNorm(cfg.stem_channels)
        blocks = []
        c_in = cfg.stem_channels
        for c_out, stride in cfg.stages:
            blocks.append(ResBlock1d(c_in, c_out, stride, cfg.kernel, rng))
            c_in = c_out
        self.blocks = blocks

    def forward(self, x):
        """Returns the final feature map and every stage output."""
        h = core.relu(self.stem_norm(self.stem(x)))
        taps = []
        for block in self.blocks:
            h = block(h)
            taps.append(h)
        return h, taps


class DecoderBlock(Module):
    def __init__(self, c_in, c_out, skip_in, skip_ch, size, rng):
        self.skip_proj = Linear(skip_in, skip_ch * size * size, rng)
        self.conv = Conv2d(c_in + skip_ch, c_out, 3, rng)
        self.norm = ChannelNorm(c_out, spatial_dims=2)
        self.skip_ch = skip_ch
        self.size = size

    def forward(self, x, skip_flat):
        x = core.upsample2d(x, 2)
        B = x.shape[0]
        skip = core.reshape(self.skip_proj(skip_flat), (B, self.skip_ch, self.size, self.size))
        x = core.concat([x, skip], axis=1)
        return core.relu(self.norm(self.conv(x)))


class FloorplanDecoder(Module):
    def __init__(self, cfg: EchoScanConfig, skip_shapes, rng):
        n = cfg.n_decoder_blocks
        chans = list(cfg.decoder_channels)
        if len(chans) < n + 1:
            chans += [chans[-1]] * (n + 1 - len(chans))
        self.seed_size = cfg.b_out // (2 ** n)
        self.seed_ch = chans[0]
        self.seed = Linear(cfg.latent_width, chans[0] * self.seed_size ** 2, rng)
        blocks, taps = [], []
        size = self.seed_size
        for j in range(n):
            size *= 2
            stage = max(len(skip_shapes) - 1 - j, 0)
            c, L = skip_shapes[stage]
            pooled = min(cfg.skip_pool, L)
            blocks.append(DecoderBlock(chans[j], chans[j + 1], c * pooled, cfg.skip_channels, size, rng))
            taps.append((stage, pooled))
        self.blocks = blocks
        self.taps = taps
        self.head = Conv2d(chans[n], 1, 1, rng)

    def forward(self, A, stage_outputs):
        B = A.shape[0]
        x = core.relu(core.reshape(self.seed(A), (B, self.seed_ch, self.seed_size, self.seed_size)))
        for block, (stage, pooled) in zip(self.blocks, self.taps):
            f = stage_outputs[stage]
            _, C, L = f.shape
            usable = (L // pooled) * pooled
            if usable != L:
                raise ShapeMismatch(f"stage length {L} not divisible by skip pool {pooled}")
            f = core.mean(core.reshape(f, (B, C, pooled, L // pooled)), axis=-1)
            x = block(x, core.reshape(f, (B, C * pooled)))
        return core.reshape(self.head(x), (B, x.shape[2], x.shape[3]))


class EchoScanNet(Module):
    def __init__(self, cfg: EchoScanConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.encoder = Encoder(cfg, rng)
        shapes = []
        L = cfg.N
        for c, stride in cfg.stages:
            L = (L - 1) // stride + 1
            shapes.append((c, L))
        self.floorplan = FloorplanDecoder(cfg, shapes, rng)
        self.height = Linear(cfg.latent_width, cfg.h_out, rng)
        self.last_features = None

    def encode(self, x):
        if x.ndim != 3 or x.shape[1:] != (self.cfg.M, self.cfg.N):
            raise ShapeMismatch(f"expected (B, {self.cfg.M}, {self.cfg.N}), got {x.shape}")
        return self.encoder(x)

    def forward(self, x):
        """x: (B, M, N) -> (floorplan logits (B, b, b), height logits (B, h))."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        F, taps = self.encode(x)
        self.last_features = F
        A = assemble_descriptor(F, self.cfg.aggregation_mode, self.cfg.rho_gem)
        return self.floorplan(A, taps), self.height(A)


# ---------------------------------------------------------------------------
# Grad-CAM


def cam_from_activations(F, dF, N):
    """Temporal saliency from features F (C, L) and target gradients dF (C, L)."""
    F = np.asarray(F, dtype=np.float64)
    weights = np.asarray(dF, dtype=np.float64).mean(axis=-1)
    cam = np.maximum((weights[:, None] * F).sum(axis=0), 0.0)
    L = cam.shape[0]
    centers = (np.arange(L) + 0.5) * N / L - 0.5
    out = np.interp(np.arange(N), centers, cam)
    peak = out.max()
    return out / peak if peak > 0 else np.zeros(N)


def grad_cam(x, model: EchoScanNet):
    """Saliency over the N input samples for the summed floorplan interior
    probability of one RIR ``x`` (M, N)."""
    xt = Tensor(np.asarray(x, dtype=model.parameters()[0].dtype)[None])
    model.zero_grad()
    fp_logits, _ = model.forward(xt)
    F = model.last_features
    target = core.sigmoid(fp_logits).sum()
    target.backward()
    dF = F.grad if F.grad is not None else np.zeros_like(F.data)
    cam = cam_from_activations(F.data[0], dF[0], model.cfg.N)
    model.zero_grad()
    return cam
