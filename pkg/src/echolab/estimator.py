"""scikit-learn style estimators wrapping RIR simulation and EchoScan training."""
import json
import logging
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from echolab import acoustics
from echolab.errors import NaNLoss
from echolab.model import EchoScanConfig, EchoScanNet, desk_profile, full_profile
from echolab.objective import (
    LossWeights,
    THRESHOLD,
    iou,
    resolve_height_orientation,
    total_loss,
)
from echolab.errors import NoInteriorPixels
from echolab.pipeline.augment import time_mask_augment
from echolab.tensor import core
from echolab.tensor.core import Tensor
from echolab.tensor.optim import Adam, LrSchedule, lr_at
from echolab.tensor.serialize import load_checkpoint, save_checkpoint
from echolab.validation import check_rir_batch, check_targets

log = logging.getLogger(__name__)


class RirSimulator(BaseEstimator, TransformerMixin):
    """Stateless transformer: sequence of RoomSpec -> (n, M, N) RIR array."""

    def __init__(self, fs=acoustics.FS, N=acoustics.N_SAMPLES, M=acoustics.N_MICS, order_cap=acoustics.ORDER_CAP,
                 first_order_only=False, noise=True, random_state=0):
        self.fs = fs
        self.N = N
        self.M = M
        self.order_cap = order_cap
        self.first_order_only = first_order_only
        self.noise = noise
        self.random_state = random_state

    def fit(self, X=None, y=None):
        return self

    def transform(self, rooms):
        seeds = np.random.SeedSequence(self.random_state).spawn(len(rooms))
        out = np.zeros((len(rooms), self.M, self.N), dtype=np.float32)
        for i, (room, ss) in enumerate(zip(rooms, seeds)):
            rir = acoustics.simulate_room(room, np.random.default_rng(ss), fs=self.fs, N=self.N,
                                          first_order_only=self.first_order_only, order_cap=self.order_cap,
                                          M=self.M, noise=self.noise)
            out[i] = rir.samples
        return out


class EchoScanEstimator(BaseEstimator):
    """Fit EchoScan on RIRs ``X`` (n, M, N) and targets ``y = (floorplans, heights)``.

    ``profile`` selects the architecture preset ("desk" or "full"); any key of
    ``model_params`` overrides it. M, N, b and h are always taken from the data.
    """

    def __init__(self, profile="desk", aggregation_mode="SP+GeM", model_params=None, n_steps=2000,
                 batch_size=8, lr_max=1e-2, lr_min=1e-6, warmup=200, cycle_length=2000, cycle_mult=2.0,
                 alpha=0.3, beta=1.0, time_mask=True, n_masks=3, max_mask_len=100, random_state=0,
                 log_every=100):
        self.profile = profile
        self.aggregation_mode = aggregation_mode
        self.model_params = model_params
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.warmup = warmup
        self.cycle_length = cycle_length
        self.cycle_mult = cycle_mult
        self.alpha = alpha
        self.beta = beta
        self.time_mask = time_mask
        self.n_masks = n_masks
        self.max_mask_len = max_mask_len
        self.random_state = random_state
        self.log_every = log_every

    # -- configuration ---------------------------------------------------------
    def _model_config(self, M, N, b, h):
        make = {"desk": desk_profile, "full": full_profile}.get(self.profile)
        if make is None:
            raise ValueError(f"unknown profile {self.profile!r}")
        kw = dict(self.model_params or {})
        kw.update(M=M, N=N, b_out=b, h_out=h, aggregation_mode=self.aggregation_mode,
                  seed=int(self.random_state))
        return make(**kw)

    def schedule(self) -> LrSchedule:
        return LrSchedule(self.lr_max, self.lr_min, self.cycle_length, self.cycle_mult, self.warmup)

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("EchoScanEstimator is not fitted yet")

    # -- training -----------------------------------------------------------------
    def init_model(self, X, y):
        X = check_rir_batch(X)
        Y_lw, y_h = check_targets(y, len(X))
        self.config_ = self._model_config(X.shape[1], X.shape[2], Y_lw.shape[1], y_h.shape[1])
        self.model_ = EchoScanNet(self.config_)
        return self

    def fit(self, X, y, callback=None):
        """Train for ``n_steps`` Adam steps on random mini-batches.

        ``callback(step, estimator)`` runs after every step; returning True
        stops training early.
        """
        X = check_rir_batch(X)
        Y_lw, y_h = check_targets(y, len(X))
        self.init_model(X, (Y_lw, y_h))
        rng = np.random.default_rng(self.random_state)
        opt = Adam(self.model_.parameters())
        sched = self.schedule()
        weights = LossWeights(self.alpha, self.beta)
        self.history_ = []
        n = len(X)
        order = rng.permutation(n)
        cursor = 0
        for step in range(self.n_steps):
            if cursor + self.batch_size > n:
                order = rng.permutation(n)
                cursor = 0
            idx = order[cursor:cursor + self.batch_size] if self.batch_size <= n else rng.integers(0, n, self.batch_size)
            cursor += self.batch_size
            xb = X[idx]
            if self.time_mask:
                xb = time_mask_augment(xb, rng, self.n_masks, self.max_mask_len)
            lr = lr_at(step, sched)
            loss = self._train_step(opt, xb, Y_lw[idx], y_h[idx], weights, lr)
            if not math.isfinite(loss):
                raise NaNLoss(f"non-finite loss {loss} at step {step} (lr={lr:.3g}, batch={idx.tolist()})")
            self.history_.append({"step": step, "loss": loss, "lr": lr})
            if self.log_every and step % self.log_every == 0:
                log.info("step %d loss %.5f lr %.3g", step, loss, lr)
            if callback is not None and callback(step, self):
                break
        return self

    def _train_step(self, opt, xb, yb_lw, yb_h, weights, lr):
        opt.zero_grad()
        fp, hh = self.model_.forward(Tensor(xb))
        loss = total_loss(core.sigmoid(fp), core.sigmoid(hh), yb_lw, yb_h, weights, batched=True)
        loss.backward()
        opt.step(lr)
        return float(loss.data)

    def batch_loss(self, X, y):
        """Total loss of the current model on (X, y) without augmentation."""
        self._check_fitted()
        P_lw, p_h = self.predict_proba(X)
        Y_lw, y_h = check_targets(y, len(P_lw))
        return float(total_loss(P_lw, p_h, Y_lw, y_h, LossWeights(self.alpha, self.beta), batched=True))

    # -- inference ------------------------------------------------------------------
    def predict_proba(self, X, chunk=32):
        """(floorplan probabilities (n, b, b), height probabilities (n, h))."""
        self._check_fitted()
        X = check_rir_batch(X, self.config_.M, self.config_.N, self.model_.parameters()[0].dtype)
        fps, hs = [], []
        for s in range(0, len(X), chunk):
            fp, hh = self.model_.forward(Tensor(X[s:s + chunk]))
            fps.append(core.sigmoid(fp).data)
            hs.append(core.sigmoid(hh).data)
        return np.concatenate(fps), np.concatenate(hs)

    def predict(self, X, threshold=THRESHOLD):
        """Binary floorplans and floor-resolved binary height vectors."""
        P_lw, p_h = self.predict_proba(X)
        Y = (P_lw >= threshold).astype(np.uint8)
        H = np.zeros(p_h.shape, dtype=np.uint8)
        for i, row in enumerate(p_h):
            try:
                H[i] = resolve_height_orientation(row, threshold)[0]
            except NoInteriorPixels:
                pass
        return Y, H

    def score(self, X, y):
        """Mean 2-D floorplan IOU."""
        Y_lw, _ = check_targets(y)
        pred, _ = self.predict(X)
        return iou(pred, Y_lw, batched=True)

    # -- persistence ------------------------------------------------------------------
    def save(self, path):
        """Write the binary checkpoint plus a ``<path>.json`` sidecar holding
        the model config and estimator parameters."""
        self._check_fitted()
        save_checkpoint(path, self.model_.state_dict())
        meta = {"model": self.config_.to_dict(), "estimator": _jsonable(self.get_params())}
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        est = cls(**meta["estimator"])
        est.config_ = EchoScanConfig.from_dict(meta["model"])
        est.model_ = EchoScanNet(est.config_)
        est.model_.load_state_dict(load_checkpoint(path))
        return est


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, (np.integer,)):
            v = int(v)
        elif isinstance(v, (np.floating,)):
            v = float(v)
        out[k] = v
    return out
