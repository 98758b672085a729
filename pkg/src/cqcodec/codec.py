"""Collaborative-quantization speech codec as a scikit-learn style estimator.

The LPC analyzer, its LSP quantizer, and the residual autoencoder cascade
are trained together: gradients of the reconstruction loss flow through the
soft-quantized LSPs into the LSP codebook via a differentiable LSP-to-LPC
conversion, the inverse filter producing the residual, and the synthesis
filter producing the output.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted
from torch import nn

from . import bitstream, dsp, lpc
from .bitstream import CodeTables, FrameCode, StreamMeta
from .config import CodecConfig
from .huffman import build_huffman_pairs, encoded_bits
from .losses import LossWeights, total_loss
from .model import AutoEncoder
from .quantization import (
    assign, differential_decode, differential_encode, dpcm_quantize, nearest_indices,
    quantile_codebook, uniform_codebook,
)
from .validation import SAMPLE_RATE, check_corpus, check_signal

log = logging.getLogger(__name__)

ORDER = lpc.ORDER
TRAIN_HOP = dsp.CODING_LEN
TEST_HOP = dsp.CODING_LEN - dsp.CROSSFADE
_CTX = (dsp.ANALYSIS_LEN - dsp.CODING_LEN) // 2
_IR_FFT = 8192


class BitrateControlError(RuntimeError):
    def __init__(self, message, achieved_kbps=None, report=None):
        super().__init__(message)
        self.achieved_kbps = achieved_kbps
        self.report = report or []


class UntrainedModelError(RuntimeError):
    pass


def measure_bitrate(n_bits, duration_s):
    """Coded bits per second, in kbps."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    return n_bits / duration_s / 1000.0


def bitrate_floor(n_autoencoders, code_width, lsp_count=ORDER, hop=TEST_HOP):
    """Lowest rate a pair code can reach: one bit per symbol pair."""
    pairs = math.ceil(lsp_count / 2) + n_autoencoders * math.ceil(code_width / 2)
    return pairs * SAMPLE_RATE / hop / 1000.0


# ---------------------------------------------------------------------------
# torch side


def _lag_matrix(seg, order=ORDER):
    """``(batch, 512, order)`` with ``[b, t, i] = seg[b, ctx + t - 1 - i]``."""
    n = seg.shape[-1] - order
    return torch.stack([seg[:, order - 1 - i:order - 1 - i + n] for i in range(order)], dim=-1)


def lpc_synthesis_torch(excitation, a, context):
    """Differentiable ``1/A(z)`` over a frame, starting from true past samples.

    The past samples enter as an equivalent input; the all-pole response is
    applied as a causal convolution with its FFT-sampled impulse response.
    That response is exact while it decays within 8192 samples, which holds
    for pole radii below about 0.999.
    """
    order = a.shape[-1]
    n = excitation.shape[-1]
    seg = torch.cat([context, torch.zeros_like(excitation)], dim=-1)
    drive = excitation + (_lag_matrix(seg, order) * a.unsqueeze(1)).sum(-1)
    inv = torch.cat([torch.ones_like(a[:, :1]), -a], dim=-1)
    impulse = torch.fft.irfft(1.0 / torch.fft.rfft(inv, n=_IR_FFT), n=_IR_FFT)[:, :n]
    m = 2 * n
    return torch.fft.irfft(torch.fft.rfft(drive, n=m) * torch.fft.rfft(impulse, n=m), n=m)[:, :n]


class CQNetwork(nn.Module):
    """Trainable state: residual autoencoders and the two kinds of codebooks."""

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.autoencoders = nn.ModuleList(
            AutoEncoder(config.n_downsample_stages, config.channels, config.bottleneck_channels)
            for _ in range(config.n_autoencoders)
        )
        self.residual_codebooks = nn.ParameterList(
            nn.Parameter(torch.linspace(-1.0, 1.0, config.residual_centroids))
            for _ in range(config.n_autoencoders)
        )
        shape = (config.lsp_centroids,) if config.lsp_codebook == "shared" else (ORDER, config.lsp_centroids)
        init = torch.linspace(0.01, math.pi - 0.01, config.lsp_centroids).expand(shape).clone()
        self.lsp_codebook = nn.Parameter(init)
        self.register_buffer("residual_gain", torch.tensor(1.0, dtype=torch.float64))
        # Distance unit of each residual quantizer; set so the initial codebook spans 2.
        self.register_buffer("code_scale", torch.ones(config.n_autoencoders))

    def forward(self, lsp, seg, n_active=None, frozen=0, quantize_lsp=True, quantize_codes=True):
        """Soft-quantized training pass.

        Returns the clean middle samples, their reconstruction, and the soft
        assignment matrices of every quantizer that ran. Autoencoders before
        ``frozen`` run hard-quantized without gradient.
        """
        cfg = self.config
        n_active = len(self.autoencoders) if n_active is None else n_active
        assignments = []
        if quantize_lsp:
            cb = self.lsp_codebook.to(lsp.dtype)
            A = assign(lsp * cfg.lsp_scale, cb * cfg.lsp_scale, "soft", cfg.alpha)
            # a soft mix of centroids need not be ordered; stabilize as the decoder does
            lsp_q = lpc.stabilize_lsp_torch((A * cb).sum(-1))
            assignments.append(A)
        else:
            lsp_q = lsp
        a = lpc.lsp_to_lpc_torch(lsp_q.double())
        seg64 = seg.double()
        x = seg64[:, ORDER:]
        e = x - (_lag_matrix(seg64, ORDER) * a.unsqueeze(1)).sum(-1)
        target = (e * self.residual_gain).float()
        remaining = target
        recon = torch.zeros_like(target)
        for i in range(n_active):
            if i < frozen:
                with torch.no_grad():
                    out = self.code_hard(i, remaining)[1]
            else:
                out, A = self.code_soft(i, remaining, quantize_codes)
                if A is not None:
                    assignments.append(A)
            recon = recon + out
            remaining = remaining - out
        x_hat = lpc_synthesis_torch(recon.double() / self.residual_gain, a, seg64[:, :ORDER])
        return x.float(), x_hat.float(), assignments

    def code_soft(self, i, residual, quantize=True):
        ae = self.autoencoders[i]
        h = ae.encode(residual)
        if not quantize:
            return ae.decode(h), None
        s = self.code_scale[i]
        mode = "straight_through" if self.config.straight_through else "soft"
        hq, A = dpcm_quantize(h * s, self.residual_codebooks[i] * s, mode, self.config.alpha)
        return ae.decode(hq / s), A

    def code_hard(self, i, residual):
        ae = self.autoencoders[i]
        hq, A = dpcm_quantize(ae.encode(residual), self.residual_codebooks[i], "hard")
        return A.argmax(-1), ae.decode(hq)

    def decode_indices(self, i, idx):
        hq = differential_decode(self.residual_codebooks[i][idx])
        return self.autoencoders[i].decode(hq)


# ---------------------------------------------------------------------------
# numpy side


@dataclass
class FrameBatch:
    """LPC analysis of a set of coding frames."""

    frames: np.ndarray  # (n, 1024) analysis frames
    lsp: np.ndarray  # (n, 16) unquantized LSPs
    degenerate: np.ndarray = field(default=None)

    @property
    def segments(self):
        return self.frames[:, _CTX - ORDER:_CTX + dsp.CODING_LEN]

    def __len__(self):
        return len(self.frames)

    @classmethod
    def concat(cls, batches):
        return cls(np.concatenate([b.frames for b in batches]),
                   np.concatenate([b.lsp for b in batches]),
                   np.concatenate([b.degenerate for b in batches]))


UNIFORM_LSP = np.arange(1, ORDER + 1) * np.pi / (ORDER + 1)


def analyze(y, hop):
    """Frame a conditioned signal and compute per-frame LSPs.

    Coding frame ``k`` covers samples ``[k*hop, k*hop + 512)``; its analysis
    frame extends 256 samples on each side.
    """
    y = np.asarray(y, dtype=np.float64)
    n = max(1, -(-(y.size - dsp.CODING_LEN) // hop) + 1)
    ext = np.concatenate([y, np.zeros((n - 1) * hop + dsp.CODING_LEN - y.size)])
    frames = dsp.frame_signal(ext, dsp.ANALYSIS_LEN, hop, pad=_CTX)[:n]
    arr = np.stack([f.samples for f in frames])
    lsps = np.empty((n, ORDER))
    degenerate = np.zeros(n, dtype=bool)
    for k, f in enumerate(arr):
        coeffs = lpc.lpc_analysis(f)
        degenerate[k] = coeffs.degenerate
        try:
            lsps[k] = UNIFORM_LSP if coeffs.degenerate else lpc.lpc_to_lsp(coeffs)
        except lpc.LspSearchError:
            degenerate[k] = True
            lsps[k] = UNIFORM_LSP
    return FrameBatch(arr, lsps, degenerate)


@dataclass
class EpochMetrics:
    epoch: int
    mse_time: float
    mel_loss: float
    quant_penalty: float
    entropy_bits: float
    measured_kbps: float
    loss: float = float("nan")
    phase: str = "train"


@dataclass
class BitrateStep:
    iteration: int
    lambda_entropy: float
    measured_kbps: float
    entropy_bits: float


class CQCodec(BaseEstimator):
    """LPC + autoencoder-cascade speech codec with trainable LSP quantization.

    Parameters mirror :class:`~cqcodec.config.CodecConfig`. ``fit`` trains on
    a corpus of 16 kHz signals; ``transform`` encodes signals to bitstreams
    and ``inverse_transform`` decodes them.

    Attributes
    ----------
    network_ : CQNetwork
    tables_ : CodeTables
        Pair Huffman tables for the LSP stream and each residual stream.
    signal_gain_ : float
        Scale applied after pre-emphasis so the corpus has unit RMS.
    lambda_entropy_ : float
        Entropy weight after bitrate control.
    history_ : list of EpochMetrics
    bitrate_report_ : list of BitrateStep
    """

    def __init__(self, target_bitrate_kbps=16.0, n_autoencoders=1, n_downsample_stages=1,
                 channels=100, bottleneck_channels=20, alpha=300.0, residual_centroids=32,
                 lsp_centroids=256, lsp_codebook="shared", lsp_unit_hz=100.0, straight_through=True,
                 mel_bank_sizes=(128, 32, 16, 8),
                 lambda_time=60.0, lambda_mel=10.0, lambda_quant=1.0, lambda_entropy=1.0 / 32,
                 epochs=30, warmup_epochs=5, finetune_epochs=5, batch_size=128,
                 learning_rate=2e-4, seed=0, control_bitrate=True, bitrate_factor=4.0,
                 bitrate_tolerance=0.10, bitrate_max_iter=8, bitrate_finetune_steps=50,
                 validation_seconds=20.0, corpus_glob="*.wav", epoch_callback=None):
        self.target_bitrate_kbps = target_bitrate_kbps
        self.n_autoencoders = n_autoencoders
        self.n_downsample_stages = n_downsample_stages
        self.channels = channels
        self.bottleneck_channels = bottleneck_channels
        self.alpha = alpha
        self.residual_centroids = residual_centroids
        self.lsp_centroids = lsp_centroids
        self.lsp_codebook = lsp_codebook
        self.lsp_unit_hz = lsp_unit_hz
        self.straight_through = straight_through
        self.mel_bank_sizes = mel_bank_sizes
        self.lambda_time = lambda_time
        self.lambda_mel = lambda_mel
        self.lambda_quant = lambda_quant
        self.lambda_entropy = lambda_entropy
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.finetune_epochs = finetune_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.control_bitrate = control_bitrate
        self.bitrate_factor = bitrate_factor
        self.bitrate_tolerance = bitrate_tolerance
        self.bitrate_max_iter = bitrate_max_iter
        self.bitrate_finetune_steps = bitrate_finetune_steps
        self.validation_seconds = validation_seconds
        self.corpus_glob = corpus_glob
        self.epoch_callback = epoch_callback

    # -- configuration ------------------------------------------------------

    @classmethod
    def from_config(cls, config, **kwargs):
        return cls(**config.to_dict(), **kwargs)

    def get_config(self):
        names = {f.name for f in fields(CodecConfig)}
        return CodecConfig(**{k: v for k, v in self.get_params().items() if k in names})

    # -- conditioning -------------------------------------------------------

    def _condition(self, x):
        return dsp.pre_emphasize(dsp.high_pass(x)) * self.signal_gain_

    def _uncondition(self, y):
        return dsp.de_emphasize(y / self.signal_gain_)

    # -- training -----------------------------------------------------------

    def fit(self, X, y=None):
        """Train on a corpus (a signal or a list of signals).

        Runs warm-up, codebook initialization, the sequential per-autoencoder
        schedule, joint finetuning of cascades, entropy-table fitting and, if
        enabled, bitrate control.
        """
        signals = check_corpus(X)
        cfg = self.get_config()
        torch.manual_seed(cfg.seed)
        self._rng = np.random.default_rng(cfg.seed)
        self.network_ = CQNetwork(cfg)
        self.lambda_entropy_ = cfg.lambda_entropy
        self.history_ = []
        self.bitrate_report_ = []

        raw = [dsp.pre_emphasize(dsp.high_pass(x)) for x in signals]
        rms = np.sqrt(np.mean(np.concatenate(raw) ** 2))
        self.signal_gain_ = float(1.0 / rms) if rms > 0 else 1.0
        conditioned = [r * self.signal_gain_ for r in raw]
        self._train = FrameBatch.concat([analyze(c, TRAIN_HOP) for c in conditioned])
        self._validation = self._validation_slice(conditioned)

        res = self._residuals(self._train, self._train.lsp)
        res_rms = np.sqrt(np.mean(res ** 2))
        self.network_.residual_gain.fill_(1.0 / res_rms if res_rms > 0 else 1.0)

        self._init_lsp_codebook()
        ae_params = [p for ae in self.network_.autoencoders for p in ae.parameters()]
        for _ in range(cfg.warmup_epochs):
            self._run_epoch(ae_params, quantize=False)
        self._init_residual_codebooks()

        epoch = 0
        for i in range(cfg.n_autoencoders):
            params = list(self.network_.autoencoders[i].parameters()) + [self.network_.residual_codebooks[i]]
            if i == 0:
                params.append(self.network_.lsp_codebook)
            opt = None
            for _ in range(cfg.epochs):
                epoch += 1
                opt = self._run_epoch(params, n_active=i + 1, frozen=i, epoch=epoch, opt=opt)
        if cfg.n_autoencoders > 1:
            opt = None
            for _ in range(cfg.finetune_epochs):
                epoch += 1
                opt = self._run_epoch(list(self.network_.parameters()), epoch=epoch, opt=opt, phase="finetune")

        self.tables_ = self._fit_tables(self._validation)
        if cfg.control_bitrate:
            try:
                self.bitrate_control(cfg.target_bitrate_kbps)
            except BitrateControlError as exc:
                warnings.warn(f"bitrate control did not converge: {exc}", RuntimeWarning)
        self.tables_ = self._fit_tables(FrameBatch.concat([analyze(c, TEST_HOP) for c in conditioned]))
        self.network_.eval()
        return self

    def _validation_slice(self, conditioned):
        need = int(self.validation_seconds * SAMPLE_RATE)
        taken = []
        for c in conditioned:
            taken.append(c[:need - sum(map(len, taken))])
            if sum(map(len, taken)) >= need:
                break
        return analyze(np.concatenate(taken), TEST_HOP)

    def _init_lsp_codebook(self):
        cfg = self.get_config()
        lsp = self._train.lsp[~self._train.degenerate]
        if lsp.size == 0:
            lsp = self._train.lsp
        values = lsp.ravel() if cfg.lsp_codebook == "shared" else lsp
        with torch.no_grad():
            self.network_.lsp_codebook.copy_(torch.as_tensor(quantile_codebook(values, cfg.lsp_centroids)))

    @torch.no_grad()
    def _init_residual_codebooks(self):
        cfg = self.get_config()
        lsp, seg = self._tensors(np.arange(min(len(self._train), 2048)))
        net = self.network_
        a = lpc.lsp_to_lpc_torch(lsp.double())
        e = seg.double()[:, ORDER:] - (_lag_matrix(seg.double()) * a.unsqueeze(1)).sum(-1)
        remaining = (e * net.residual_gain).float()
        for i, ae in enumerate(net.autoencoders):
            dh = differential_encode(ae.encode(remaining))
            cb = uniform_codebook(dh.numpy().ravel(), cfg.residual_centroids)
            net.residual_codebooks[i].copy_(torch.as_tensor(cb, dtype=torch.float32))
            net.code_scale[i] = 2.0 / (cb[-1] - cb[0])
            remaining = remaining - net.code_hard(i, remaining)[1]

    def _tensors(self, idx, batch=None):
        batch = self._train if batch is None else batch
        return (torch.as_tensor(batch.lsp[idx], dtype=torch.float32),
                torch.as_tensor(batch.segments[idx], dtype=torch.float32))

    def _weights(self, lambda_entropy=None):
        lam = self.lambda_entropy_ if lambda_entropy is None else lambda_entropy
        return LossWeights(self.lambda_time, self.lambda_mel, self.lambda_quant, lam)

    def _step(self, idx, opt, n_active=None, frozen=0, quantize=True):
        lsp, seg = self._tensors(idx)
        x, x_hat, assignments = self.network_(
            lsp, seg, n_active=n_active, frozen=frozen, quantize_lsp=quantize, quantize_codes=quantize)
        terms = total_loss(x, x_hat, assignments, self._weights(), self.mel_bank_sizes)
        opt.zero_grad()
        terms.total.backward()
        opt.step()
        return terms

    def _run_epoch(self, params, n_active=None, frozen=0, quantize=True, epoch=None, opt=None, phase="train"):
        from .nn import Adam

        self.network_.train()
        opt = Adam(params, lr=self.learning_rate) if opt is None else opt
        order = self._rng.permutation(len(self._train))
        sums = np.zeros(5)
        n = 0
        for start in range(0, len(order), self.batch_size):
            t = self._step(order[start:start + self.batch_size], opt, n_active, frozen, quantize)
            sums += [t.total.item(), t.mse_time, t.mel_loss, t.quant_penalty, t.entropy_bits]
            n += 1
        if epoch is not None:
            mean = sums / max(n, 1)
            kbps = self._measure(self._validation, build_tables=True)[0]
            m = EpochMetrics(epoch, mean[1], mean[2], mean[3], mean[4], kbps, mean[0], phase)
            self.history_.append(m)
            log.info("epoch %d loss %.4f mse %.4f kbps %.2f", epoch, m.loss, m.mse_time, kbps)
            if self.epoch_callback is not None:
                self.epoch_callback(m)
        return opt

    def finetune(self, n_steps, lambda_entropy=None):
        """Jointly update every module for ``n_steps`` minibatches."""
        from .nn import Adam

        if lambda_entropy is not None:
            self.lambda_entropy_ = lambda_entropy
        opt = Adam(list(self.network_.parameters()), lr=self.learning_rate)
        self.network_.train()
        terms = []
        for _ in range(n_steps):
            idx = self._rng.choice(len(self._train), size=min(self.batch_size, len(self._train)), replace=False)
            terms.append(self._step(np.sort(idx), opt))
        self.network_.eval()
        return terms

    # -- bitrate control ----------------------------------------------------

    def bitrate_control(self, target_kbps):
        """Adjust the entropy weight until the coded rate is near ``target_kbps``.

        The weight is multiplied (rate too high) or divided (rate too low) by
        ``bitrate_factor``; whenever the direction reverses the factor is
        replaced by its square root. Between adjustments the model is
        finetuned for ``bitrate_finetune_steps`` minibatches.
        """
        check_is_fitted(self, "network_")
        cfg = self.get_config()
        floor = bitrate_floor(cfg.n_autoencoders, cfg.code_width)
        if target_kbps < floor:
            raise BitrateControlError(
                f"target {target_kbps:.2f} kbps is below the coding floor of {floor:.2f} kbps",
                achieved_kbps=floor)
        factor = cfg.bitrate_factor
        last = 0
        report = self.bitrate_report_ = []
        for it in range(cfg.bitrate_max_iter + 1):
            kbps, entropy = self._measure(self._validation, build_tables=True)
            report.append(BitrateStep(it, self.lambda_entropy_, kbps, entropy))
            log.info("bitrate step %d lambda %.4g -> %.2f kbps", it, self.lambda_entropy_, kbps)
            if abs(kbps - target_kbps) <= cfg.bitrate_tolerance * target_kbps:
                return kbps
            if it == cfg.bitrate_max_iter:
                break
            direction = 1 if kbps > target_kbps else -1
            if last and direction != last:
                factor = math.sqrt(factor)
            last = direction
            self.finetune(cfg.bitrate_finetune_steps, self.lambda_entropy_ * factor ** direction)
        raise BitrateControlError(
            f"reached {kbps:.2f} kbps after {cfg.bitrate_max_iter} adjustments (target {target_kbps:.2f})",
            achieved_kbps=kbps, report=report)

    def _measure(self, batch, build_tables=False):
        """Coded rate (kbps) and mean per-quantizer hard-assignment entropy on ``batch``."""
        codes, _ = self._encode_batch(batch)
        tables = self._fit_tables_from_codes(codes) if build_tables else self.tables_
        bits = sum(encoded_bits(c.lsp_indices, tables.lsp)
                   + sum(encoded_bits(r, t) for r, t in zip(c.residual_indices, tables.residual))
                   for c in codes)
        duration = ((len(batch) - 1) * TEST_HOP + dsp.CODING_LEN) / SAMPLE_RATE
        entropies = [_index_entropy(np.concatenate([c.lsp_indices for c in codes]), self.lsp_centroids)]
        for i in range(self.n_autoencoders):
            entropies.append(_index_entropy(
                np.concatenate([c.residual_indices[i] for c in codes]), self.residual_centroids))
        return measure_bitrate(bits, duration), float(np.mean(entropies))

    def _fit_tables(self, batch):
        return self._fit_tables_from_codes(self._encode_batch(batch)[0])

    def _fit_tables_from_codes(self, codes):
        lsp = build_huffman_pairs([c.lsp_indices for c in codes], self.lsp_centroids)
        res = [build_huffman_pairs([c.residual_indices[i] for c in codes], self.residual_centroids)
               for i in range(self.n_autoencoders)]
        return CodeTables(lsp, res)

    # -- coding -------------------------------------------------------------

    def _lsp_values(self, idx):
        cb = self.network_.lsp_codebook.detach().double().numpy()
        vals = cb[idx] if cb.ndim == 1 else cb[np.arange(ORDER), idx]
        return lpc.stabilize_lsp(vals)

    def _residuals(self, batch, lsp):
        out = np.empty((len(batch), dsp.CODING_LEN))
        for k in range(len(batch)):
            a = lpc.lsp_to_lpc(lsp[k]).a
            out[k] = lpc.compute_residual(batch.frames[k], a)
        return out

    @torch.no_grad()
    def _encode_batch(self, batch):
        """Hard-quantize a batch of analysis frames into frame codes.

        Returns the codes and the decoded residual (autoencoder domain, summed
        over the cascade) for each frame.
        """
        net = self.network_
        cb = net.lsp_codebook.detach().double().numpy()
        lsp_idx = nearest_indices(batch.lsp, cb)
        coeffs = [lpc.lsp_to_lpc(self._lsp_values(i)).a for i in lsp_idx]
        res = np.stack([lpc.compute_residual(f, a) for f, a in zip(batch.frames, coeffs)])
        remaining = torch.as_tensor(res * float(net.residual_gain), dtype=torch.float32)
        recon = torch.zeros_like(remaining)
        indices = []
        for i in range(len(net.autoencoders)):
            idx, out = net.code_hard(i, remaining)
            indices.append(idx.numpy())
            recon += out
            remaining -= out
        codes = [FrameCode(lsp_idx[k], [ix[k] for ix in indices]) for k in range(len(batch))]
        return codes, recon.double().numpy() / float(net.residual_gain)

    @torch.no_grad()
    def decode_frames(self, codes, memory=None):
        """Reconstruct conditioned-domain frames from frame codes.

        Frames are synthesized in order; each frame's filter memory is the
        last 16 samples before its start in the preceding decoded frame.
        """
        net = self.network_
        if not codes:
            return []
        recon = torch.zeros(len(codes), dsp.CODING_LEN)
        for i in range(len(net.autoencoders)):
            idx = torch.as_tensor(np.stack([c.residual_indices[i] for c in codes]))
            recon += net.decode_indices(i, idx)
        excitation = recon.double().numpy() / float(net.residual_gain)
        memory = np.zeros(ORDER) if memory is None else np.asarray(memory, dtype=np.float64)
        out = []
        for c, e in zip(codes, excitation):
            a = lpc.lsp_to_lpc(self._lsp_values(c.lsp_indices)).a
            frame, _ = lpc.synthesize(e, a, memory)
            memory = frame[TEST_HOP - ORDER:TEST_HOP]
            out.append(frame)
        return out

    def encode_frame(self, frame, memory=None):
        """Code one 1024-sample conditioned analysis frame.

        Returns the :class:`FrameCode` and the decoded middle 512 samples.
        """
        check_is_fitted(self, "network_")
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != (dsp.ANALYSIS_LEN,):
            raise ValueError(f"analysis frame must have {dsp.ANALYSIS_LEN} samples")
        coeffs = lpc.lpc_analysis(frame)
        lsp = UNIFORM_LSP if coeffs.degenerate else lpc.lpc_to_lsp(coeffs)
        codes, _ = self._encode_batch(FrameBatch(frame[None], lsp[None], np.array([coeffs.degenerate])))
        return codes[0], self.decode_frames(codes, memory)[0]

    def _check_ready(self):
        check_is_fitted(self, "network_")
        for p in self.network_.parameters():
            if not torch.isfinite(p).all():
                raise UntrainedModelError("model parameters are not finite")

    def encode(self, x, model_hash=b"\0" * 8):
        """Encode one signal to a bitstream (bytes)."""
        self._check_ready()
        x = check_signal(x)
        batch = analyze(self._condition(x), TEST_HOP)
        codes, _ = self._encode_batch(batch)
        meta = StreamMeta(x.size, self.get_config().digest(), model_hash, self.n_autoencoders,
                          ORDER, self.get_config().code_width)
        return bitstream.serialize(codes, self.tables_, meta)

    def decode(self, data, model_hash=None):
        """Decode a bitstream to a signal of the original length."""
        self._check_ready()
        frames, meta = bitstream.parse(data, self.tables_)
        if model_hash is not None and meta.model_hash != model_hash:
            raise bitstream.BitstreamError("bitstream was produced by a different model")
        if meta.config_hash != self.get_config().digest():
            raise bitstream.BitstreamError("bitstream was produced with a different configuration")
        if not frames:
            return np.zeros(meta.sample_count)
        y = dsp.synthesis_overlap_add(self.decode_frames(frames))[:meta.sample_count]
        y = np.concatenate([y, np.zeros(meta.sample_count - y.size)])
        return self._uncondition(y)

    def transform(self, X):
        """Encode each signal; returns a list of bitstreams."""
        return [self.encode(x) for x in check_corpus(X)]

    def inverse_transform(self, B):
        if isinstance(B, (bytes, bytearray)):
            B = [B]
        return [self.decode(b) for b in B]

    def score(self, X, y=None):
        """Mean SNR (dB) of decode(encode(x)) over the signals in ``X``."""
        from .metrics import snr

        signals = check_corpus(X)
        return float(np.mean([snr(x, self.decode(self.encode(x))) for x in signals]))

    def bitrate(self, x):
        """Coded rate (kbps) of one signal, header excluded."""
        data = self.encode(x)
        meta, _ = bitstream.read_header(data)
        return measure_bitrate(meta.payload_bits, meta.sample_count / SAMPLE_RATE)


def _index_entropy(idx, J):
    p = np.bincount(np.asarray(idx).ravel(), minlength=J) / max(np.asarray(idx).size, 1)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())
