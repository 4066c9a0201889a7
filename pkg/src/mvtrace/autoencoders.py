"""Multi-view representation models and their training loops.

Two trainable architectures operate on per-vertex feature pairs
``(x_task, x_rest)``:

* a concatenated-input autoencoder (plus its monomodal single-view
  variants): one encoder/decoder stack over the chosen input block;
* a dual-encoder multi-view autoencoder ("mdae"): one encoder per view, the
  two codes concatenated (task first, then rest) into a joint bottleneck
  that feeds *both* decoders, trained on the unweighted sum of the two
  per-view reconstruction MSEs.

A PCA wrapper, a raw passthrough and a fixed-latent oracle expose the same
subject-encoding interface so the evaluation harness can swap them freely.
Inputs are standardized per feature on the training data; sigmoid-output
variants additionally min-max map the reconstruction targets to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import io, nn
from .data import LatentSubject, SubjectRecord, stack_views
from .pca import PcaModel, fit_pca, pca_encode

KINDS = ("monomodal-task", "monomodal-rest", "concat-ae", "mdae")
HIDDEN_ACTIVATIONS = ("linear", "relu")
OUTPUT_ACTIVATIONS = ("linear", "sigmoid")

ENC_MIN, ENC_MAX = 2, 100

# Default hidden stacks (per side, encoder order); the three-layer variants
# performed best in the architecture sweep.
DEFAULT_HIDDEN = {
    "monomodal-task": (140, 120),
    "monomodal-rest": (140, 120),
    "concat-ae": (200, 130),
    "mdae": (140, 120),
}


@dataclass(frozen=True)
class ViewSpec:
    """Feature counts of the two views."""

    d_task: int
    d_rest: int

    def __post_init__(self):
        if self.d_task < 1 or self.d_rest < 1:
            raise ValueError("view dimensions must be >= 1")

    @property
    def d_concat(self) -> int:
        return self.d_task + self.d_rest


@dataclass
class ArchitectureConfig:
    """One autoencoder architecture.

    ``hidden_dims`` lists the encoder-side hidden widths before the
    bottleneck; the decoder mirrors them.  For ``mdae`` the widths apply to
    each per-view stack and ``enc_split = (enc_t, enc_r)`` divides the
    bottleneck between the task and rest encoders (balanced by default).
    """

    kind: str
    enc: int
    hidden_dims: tuple[int, ...] = ()
    enc_split: tuple[int, int] | None = None
    hidden_activation: str = "linear"
    output_activation: str = "linear"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (ENC_MIN <= self.enc <= ENC_MAX):
            raise ValueError(f"enc must be in [{ENC_MIN}, {ENC_MAX}], got {self.enc}")
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be positive")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"hidden_activation must be in {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be in {OUTPUT_ACTIVATIONS}")
        if self.kind == "mdae":
            if self.enc_split is None:
                self.enc_split = (self.enc - self.enc // 2, self.enc // 2)
            enc_t, enc_r = (int(v) for v in self.enc_split)
            if enc_t < 1 or enc_r < 1 or enc_t + enc_r != self.enc:
                raise ValueError(
                    f"enc_split {self.enc_split} must be two positive ints summing "
                    f"to enc={self.enc}"
                )
            self.enc_split = (enc_t, enc_r)
        elif self.enc_split is not None:
            raise ValueError("enc_split only applies to kind='mdae'")

    def input_dim(self, view: ViewSpec) -> int:
        if self.kind == "monomodal-task":
            return view.d_task
        if self.kind == "monomodal-rest":
            return view.d_rest
        return view.d_concat


def stack_dims(config: ArchitectureConfig, view: ViewSpec) -> list[int]:
    """Full symmetric layer-width list of a single-stack architecture,
    e.g. [d_in, 200, 130, enc, 130, 200, d_in]."""
    if config.kind == "mdae":
        raise ValueError("mdae has per-view stacks; see mdae_dims")
    d = config.input_dim(view)
    hidden = list(config.hidden_dims)
    return [d, *hidden, config.enc, *reversed(hidden), d]


def mdae_dims(config: ArchitectureConfig, view: ViewSpec) -> dict[str, list[int]]:
    """Per-network width lists of an mdae architecture."""
    if config.kind != "mdae":
        raise ValueError("mdae_dims expects kind='mdae'")
    enc_t, enc_r = config.enc_split
    hidden = list(config.hidden_dims)
    rev = list(reversed(hidden))
    return {
        "encoder_task": [view.d_task, *hidden, enc_t],
        "encoder_rest": [view.d_rest, *hidden, enc_r],
        "decoder_task": [config.enc, *rev, view.d_task],
        "decoder_rest": [config.enc, *rev, view.d_rest],
    }


def table_architectures(
    view: ViewSpec,
    *,
    enc: int = 10,
    hidden_activation: str = "linear",
    output_activation: str = "linear",
) -> dict[str, ArchitectureConfig]:
    """The catalog of stackings investigated in the architecture sweep.

    One-layer rows bottleneck directly; two- and three-layer rows insert the
    listed hidden widths on each side.  The mdae rows reuse the per-view
    hidden widths for both view stacks.
    """
    acts = {"hidden_activation": hidden_activation, "output_activation": output_activation}
    cat: dict[str, ArchitectureConfig] = {}
    for label, kind in (
        ("task", "monomodal-task"),
        ("rest", "monomodal-rest"),
        ("concat", "concat-ae"),
    ):
        cat[f"ae-{label}-1"] = ArchitectureConfig(kind=kind, enc=enc, hidden_dims=(), **acts)
    for width in (120, 130):
        cat[f"ae-task-2-{width}"] = ArchitectureConfig(
            kind="monomodal-task", enc=enc, hidden_dims=(width,), **acts
        )
        cat[f"ae-rest-2-{width}"] = ArchitectureConfig(
            kind="monomodal-rest", enc=enc, hidden_dims=(width,), **acts
        )
    for width in (150, 200):
        cat[f"ae-concat-2-{width}"] = ArchitectureConfig(
            kind="concat-ae", enc=enc, hidden_dims=(width,), **acts
        )
    for width in (120, 130):
        cat[f"ae-task-3-140-{width}"] = ArchitectureConfig(
            kind="monomodal-task", enc=enc, hidden_dims=(140, width), **acts
        )
        cat[f"ae-rest-3-140-{width}"] = ArchitectureConfig(
            kind="monomodal-rest", enc=enc, hidden_dims=(140, width), **acts
        )
    cat["ae-concat-3-250-150"] = ArchitectureConfig(
        kind="concat-ae", enc=enc, hidden_dims=(250, 150), **acts
    )
    cat["ae-concat-3-200-130"] = ArchitectureConfig(
        kind="concat-ae", enc=enc, hidden_dims=(200, 130), **acts
    )
    for width in (120, 130):
        cat[f"mdae-2-{width}"] = ArchitectureConfig(
            kind="mdae", enc=enc, hidden_dims=(width,), **acts
        )
        cat[f"mdae-3-140-{width}"] = ArchitectureConfig(
            kind="mdae", enc=enc, hidden_dims=(140, width), **acts
        )
    return cat


@dataclass
class FeatureScaler:
    """Per-feature standardization fit on training data only.

    ``target(x)`` produces reconstruction targets: the standardized features,
    additionally min-max mapped to [0, 1] when the scaler was fit with
    ``minmax=True`` (sigmoid-output models).
    """

    mean: np.ndarray
    std: np.ndarray
    minmax_low: np.ndarray | None = None
    minmax_span: np.ndarray | None = None

    @classmethod
    def fit(cls, data: np.ndarray, *, minmax: bool = False) -> "FeatureScaler":
        data = np.asarray(data, dtype=np.float64)
        mean = data.mean(axis=0)
        std = data.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        scaler = cls(mean=mean, std=std)
        if minmax:
            standardized = (data - mean) / std
            low = standardized.min(axis=0)
            span = standardized.max(axis=0) - low
            scaler.minmax_low = low
            scaler.minmax_span = np.where(span < 1e-12, 1.0, span)
        return scaler

    def transform(self, data: np.ndarray) -> np.ndarray:
        return (np.asarray(data, dtype=np.float64) - self.mean) / self.std

    def target(self, data: np.ndarray) -> np.ndarray:
        standardized = self.transform(data)
        if self.minmax_low is None:
            return standardized
        return (standardized - self.minmax_low) / self.minmax_span

    def to_dict(self) -> dict:
        out = {"mean": self.mean.tolist(), "std": self.std.tolist()}
        if self.minmax_low is not None:
            out["minmax_low"] = self.minmax_low.tolist()
            out["minmax_span"] = self.minmax_span.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(
            mean=np.array(d["mean"], dtype=np.float64),
            std=np.array(d["std"], dtype=np.float64),
            minmax_low=(
                np.array(d["minmax_low"], dtype=np.float64) if "minmax_low" in d else None
            ),
            minmax_span=(
                np.array(d["minmax_span"], dtype=np.float64) if "minmax_span" in d else None
            ),
        )


class _SubjectEncoderMixin:
    """Vertex-wise subject encoding shared by all view-based models."""

    def encode_subject(self, subject: SubjectRecord) -> LatentSubject:
        z = self.encode_pair(subject.x_task, subject.x_rest)
        return LatentSubject(subject_id=subject.subject_id, z=np.atleast_2d(z))


class ConcatAutoencoder(_SubjectEncoderMixin):
    """Single-stack autoencoder over one view or the concatenated pair."""

    def __init__(self, config, view, scaler, encoder, decoder, epoch_losses):
        self.config = config
        self.view = view
        self.scaler = scaler
        self.encoder = encoder
        self.decoder = decoder
        self.epoch_losses = epoch_losses

    @property
    def latent_dim(self) -> int:
        return self.config.enc

    def _model_input(self, x_task, x_rest) -> np.ndarray:
        x_task = np.asarray(x_task, dtype=np.float64)
        x_rest = np.asarray(x_rest, dtype=np.float64)
        if self.config.kind == "monomodal-task":
            return x_task
        if self.config.kind == "monomodal-rest":
            return x_rest
        return np.concatenate([x_task, x_rest], axis=-1)

    def encode_pair(self, x_task, x_rest) -> np.ndarray:
        x = self._model_input(x_task, x_rest)
        single = x.ndim == 1
        z = self.encoder.forward(self.scaler.transform(np.atleast_2d(x)))
        return z[0] if single else z

    def reconstruction_mse(self, x_task, x_rest) -> float:
        """Reconstruction MSE in the (normalized) target space."""
        x = np.atleast_2d(self._model_input(x_task, x_rest))
        recon = self.decoder.forward(self.encoder.forward(self.scaler.transform(x)))
        return nn.mse_loss(recon, self.scaler.target(x))

    def save(self, path) -> None:
        header = {
            "kind": self.config.kind,
            "enc": self.config.enc,
            "hidden_dims": list(self.config.hidden_dims),
            "hidden_activation": self.config.hidden_activation,
            "output_activation": self.config.output_activation,
            "view": {"d_task": self.view.d_task, "d_rest": self.view.d_rest},
            "scaler": self.scaler.to_dict(),
        }
        io.write_model_container(
            path, header, {"encoder": self.encoder, "decoder": self.decoder}
        )


class MultiViewAutoencoder(_SubjectEncoderMixin):
    """Dual-encoder autoencoder with a concatenated joint bottleneck.

    The latent code is ``z = [encoder_task(x_task), encoder_rest(x_rest)]``
    (task block first) and both decoders read the full code.
    """

    def __init__(
        self, config, view, scaler_task, scaler_rest,
        encoder_task, encoder_rest, decoder_task, decoder_rest, epoch_losses,
    ):
        self.config = config
        self.view = view
        self.scaler_task = scaler_task
        self.scaler_rest = scaler_rest
        self.encoder_task = encoder_task
        self.encoder_rest = encoder_rest
        self.decoder_task = decoder_task
        self.decoder_rest = decoder_rest
        self.epoch_losses = epoch_losses

    @property
    def latent_dim(self) -> int:
        return self.config.enc

    def encode_pair(self, x_task, x_rest) -> np.ndarray:
        x_task = np.asarray(x_task, dtype=np.float64)
        single = x_task.ndim == 1
        z_t = self.encoder_task.forward(self.scaler_task.transform(np.atleast_2d(x_task)))
        z_r = self.encoder_rest.forward(self.scaler_rest.transform(np.atleast_2d(x_rest)))
        z = np.concatenate([z_t, z_r], axis=1)
        return z[0] if single else z

    def view_reconstruction_mse(self, x_task, x_rest) -> tuple[float, float]:
        z = np.atleast_2d(self.encode_pair(x_task, x_rest))
        loss_t = nn.mse_loss(
            self.decoder_task.forward(z), self.scaler_task.target(np.atleast_2d(x_task))
        )
        loss_r = nn.mse_loss(
            self.decoder_rest.forward(z), self.scaler_rest.target(np.atleast_2d(x_rest))
        )
        return loss_t, loss_r

    def reconstruction_mse(self, x_task, x_rest) -> float:
        loss_t, loss_r = self.view_reconstruction_mse(x_task, x_rest)
        return loss_t + loss_r

    def save(self, path) -> None:
        header = {
            "kind": "mdae",
            "enc": self.config.enc,
            "enc_split": list(self.config.enc_split),
            "hidden_dims": list(self.config.hidden_dims),
            "hidden_activation": self.config.hidden_activation,
            "output_activation": self.config.output_activation,
            "view": {"d_task": self.view.d_task, "d_rest": self.view.d_rest},
            "scaler_task": self.scaler_task.to_dict(),
            "scaler_rest": self.scaler_rest.to_dict(),
        }
        io.write_model_container(
            path,
            header,
            {
                "encoder_task": self.encoder_task,
                "encoder_rest": self.encoder_rest,
                "decoder_task": self.decoder_task,
                "decoder_rest": self.decoder_rest,
            },
        )


def _sample_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept either (X_task, X_rest) arrays or a list of (x_t, x_r) pairs."""
    if isinstance(data, tuple) and len(data) == 2:
        x_task, x_rest = (np.asarray(v, dtype=np.float64) for v in data)
    else:
        pairs = list(data)
        if not pairs:
            raise ValueError("empty training data")
        x_task = np.asarray([p[0] for p in pairs], dtype=np.float64)
        x_rest = np.asarray([p[1] for p in pairs], dtype=np.float64)
    if x_task.ndim != 2 or x_rest.ndim != 2:
        raise ValueError("training views must be 2-D (samples x features)")
    if x_task.shape[0] != x_rest.shape[0]:
        raise ValueError("views disagree on sample count")
    if x_task.shape[0] == 0:
        raise ValueError("empty training data")
    return x_task, x_rest


def train_concat_ae(
    data,
    config: ArchitectureConfig,
    seed: int,
    *,
    epochs: int = 300,
    batch_size: int = 500,
    learning_rate: float = 1e-3,
) -> ConcatAutoencoder:
    """Train a concatenated-input (or monomodal) autoencoder.

    ``data`` is either a pair of (N, d_task)/(N, d_rest) arrays or a list of
    per-sample view pairs.  Returns the trained model with its per-epoch
    training losses on ``epoch_losses``.
    """
    if config.kind == "mdae":
        raise ValueError("use train_mdae for kind='mdae'")
    x_task, x_rest = _sample_arrays(data)
    view = ViewSpec(d_task=x_task.shape[1], d_rest=x_rest.shape[1])
    if config.kind == "monomodal-task":
        x = x_task
    elif config.kind == "monomodal-rest":
        x = x_rest
    else:
        x = np.concatenate([x_task, x_rest], axis=1)
    scaler = FeatureScaler.fit(x, minmax=config.output_activation == "sigmoid")
    inputs = scaler.transform(x)
    targets = scaler.target(x)
    rng = np.random.default_rng(seed)
    mlp = nn.MLP.from_dims(
        stack_dims(config, view), config.hidden_activation, config.output_activation, rng
    )
    losses = nn.train_mlp(
        mlp, inputs, targets,
        epochs=epochs, batch_size=batch_size, learning_rate=learning_rate,
        seed=int(rng.integers(2**31)),
    )
    n_enc = len(config.hidden_dims) + 1
    encoder = nn.MLP(mlp.layers[:n_enc])
    decoder = nn.MLP(mlp.layers[n_enc:])
    return ConcatAutoencoder(config, view, scaler, encoder, decoder, losses)


def train_mdae(
    data,
    config: ArchitectureConfig,
    seed: int,
    *,
    epochs: int = 300,
    batch_size: int = 500,
    learning_rate: float = 1e-3,
) -> MultiViewAutoencoder:
    """Jointly train the four mdae networks on the two-term MSE loss.

    The loss is the unweighted sum of the task-view and rest-view
    reconstruction MSEs, both decoded from the shared concatenated code.
    ``epoch_losses`` on the returned model holds (total, task, rest) per
    epoch.
    """
    if config.kind != "mdae":
        raise ValueError("train_mdae expects kind='mdae'")
    x_task, x_rest = _sample_arrays(data)
    view = ViewSpec(d_task=x_task.shape[1], d_rest=x_rest.shape[1])
    minmax = config.output_activation == "sigmoid"
    scaler_task = FeatureScaler.fit(x_task, minmax=minmax)
    scaler_rest = FeatureScaler.fit(x_rest, minmax=minmax)
    in_task = scaler_task.transform(x_task)
    in_rest = scaler_rest.transform(x_rest)
    tgt_task = scaler_task.target(x_task)
    tgt_rest = scaler_rest.target(x_rest)

    rng = np.random.default_rng(seed)
    dims = mdae_dims(config, view)
    hid, out = config.hidden_activation, config.output_activation
    # Encoders end in the hidden activation (the bottleneck is a hidden
    # layer); decoders end in the output activation.
    encoder_task = nn.MLP.from_dims(dims["encoder_task"], hid, hid, rng)
    encoder_rest = nn.MLP.from_dims(dims["encoder_rest"], hid, hid, rng)
    decoder_task = nn.MLP.from_dims(dims["decoder_task"], hid, out, rng)
    decoder_rest = nn.MLP.from_dims(dims["decoder_rest"], hid, out, rng)

    params = (
        encoder_task.parameters() + encoder_rest.parameters()
        + decoder_task.parameters() + decoder_rest.parameters()
    )
    state = nn.AdamState.for_parameters(params, learning_rate)
    enc_t = config.enc_split[0]
    n = in_task.shape[0]
    shuffle_rng = np.random.default_rng(int(rng.integers(2**31)))
    epoch_losses: list[tuple[float, float, float]] = []
    for _ in range(epochs):
        order = shuffle_rng.permutation(n)
        tot = tot_t = tot_r = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            zt, cache_et = encoder_task.forward_cache(in_task[idx])
            zr, cache_er = encoder_rest.forward_cache(in_rest[idx])
            z = np.concatenate([zt, zr], axis=1)
            rt, cache_dt = decoder_task.forward_cache(z)
            rr, cache_dr = decoder_rest.forward_cache(z)
            t_t, t_r = tgt_task[idx], tgt_rest[idx]
            loss_t = nn.mse_loss(rt, t_t)
            loss_r = nn.mse_loss(rr, t_r)
            grads_dt, dz_t = decoder_task.backward_cache(cache_dt, nn.mse_gradient(rt, t_t))
            grads_dr, dz_r = decoder_rest.backward_cache(cache_dr, nn.mse_gradient(rr, t_r))
            dz = dz_t + dz_r
            grads_et, _ = encoder_task.backward_cache(cache_et, dz[:, :enc_t])
            grads_er, _ = encoder_rest.backward_cache(cache_er, dz[:, enc_t:])
            flat = [
                g
                for groups in (grads_et, grads_er, grads_dt, grads_dr)
                for pair in groups
                for g in pair
            ]
            nn.adam_step(state, params, flat)
            tot += (loss_t + loss_r) * idx.size
            tot_t += loss_t * idx.size
            tot_r += loss_r * idx.size
        epoch_losses.append((tot / n, tot_t / n, tot_r / n))
    return MultiViewAutoencoder(
        config, view, scaler_task, scaler_rest,
        encoder_task, encoder_rest, decoder_task, decoder_rest, epoch_losses,
    )


def encode(model, x_task, x_rest) -> np.ndarray:
    """Latent code of one sample pair (or a batch of pairs)."""
    return model.encode_pair(x_task, x_rest)


def encode_subject(model, subject: SubjectRecord) -> LatentSubject:
    """Encode every vertex of a subject into an (m, enc) latent matrix."""
    return model.encode_subject(subject)


# --- non-autoencoder representations ----------------------------------------


class PcaRepresentation(_SubjectEncoderMixin):
    """PCA over the standardized concatenated views."""

    def __init__(self, scaler: FeatureScaler, model: PcaModel):
        self.scaler = scaler
        self.model = model

    @property
    def latent_dim(self) -> int:
        return self.model.enc

    def encode_pair(self, x_task, x_rest) -> np.ndarray:
        x = np.concatenate(
            [np.asarray(x_task, dtype=np.float64), np.asarray(x_rest, dtype=np.float64)],
            axis=-1,
        )
        return pca_encode(self.model, self.scaler.transform(x))

    def save(self, path) -> None:
        # Encode/decode are affine, so the model ships as two linear layers.
        enc_w = self.model.components.T
        enc_b = -self.model.mean @ self.model.components.T
        dec_w = self.model.components
        dec_b = self.model.mean
        header = {
            "kind": "pca",
            "enc": self.model.enc,
            "explained_variance": self.model.explained_variance.tolist(),
            "scaler": self.scaler.to_dict(),
        }
        io.write_model_container(
            path,
            header,
            {
                "encoder": nn.MLP([nn.DenseLayer(enc_w, enc_b, "linear")]),
                "decoder": nn.MLP([nn.DenseLayer(dec_w, dec_b, "linear")]),
            },
        )


class RawRepresentation(_SubjectEncoderMixin):
    """Identity passthrough of the concatenated views.

    ``columns`` truncates (or zero-pads) the concatenated features to a fixed
    latent width; None keeps all of them.
    """

    def __init__(self, columns: int | None = None):
        self.columns = columns
        self._dim: int | None = None

    @property
    def latent_dim(self) -> int:
        if self.columns is not None:
            return self.columns
        if self._dim is None:
            raise ValueError("raw representation width unknown before first encode")
        return self._dim

    def encode_pair(self, x_task, x_rest) -> np.ndarray:
        x = np.concatenate(
            [np.asarray(x_task, dtype=np.float64), np.asarray(x_rest, dtype=np.float64)],
            axis=-1,
        )
        self._dim = x.shape[-1]
        if self.columns is None or self.columns == x.shape[-1]:
            return x
        if self.columns < x.shape[-1]:
            return x[..., : self.columns]
        pad_shape = list(x.shape)
        pad_shape[-1] = self.columns - x.shape[-1]
        return np.concatenate([x, np.zeros(pad_shape)], axis=-1)

    def save(self, path) -> None:
        io.write_model_container(path, {"kind": "raw", "columns": self.columns}, {})


class OracleRepresentation:
    """Fixed per-subject latents, looked up by subject id (test fixture)."""

    def __init__(self, latents: Mapping[str, np.ndarray]):
        self.latents = {k: np.asarray(v, dtype=np.float64) for k, v in latents.items()}
        dims = {v.shape[1] for v in self.latents.values()}
        if len(dims) != 1:
            raise ValueError("oracle latents disagree on latent dim")
        self._dim = dims.pop()

    @property
    def latent_dim(self) -> int:
        return self._dim

    def encode_subject(self, subject: SubjectRecord) -> LatentSubject:
        if subject.subject_id not in self.latents:
            raise KeyError(f"no oracle latent for subject {subject.subject_id!r}")
        return LatentSubject(subject.subject_id, self.latents[subject.subject_id])


def load_representation(path):
    """Load any saved representation model from an MVNN container."""
    header, blocks = io.read_model_container(path)
    kind = header.get("kind")
    if kind == "pca":
        decoder = blocks["decoder"].layers[0]
        model = PcaModel(
            mean=decoder.bias.copy(),
            components=decoder.weights.copy(),
            explained_variance=np.array(header["explained_variance"], dtype=np.float64),
        )
        return PcaRepresentation(FeatureScaler.from_dict(header["scaler"]), model)
    if kind == "raw":
        return RawRepresentation(columns=header.get("columns"))
    view = ViewSpec(**header["view"])
    if kind == "mdae":
        config = ArchitectureConfig(
            kind="mdae",
            enc=header["enc"],
            hidden_dims=tuple(header["hidden_dims"]),
            enc_split=tuple(header["enc_split"]),
            hidden_activation=header["hidden_activation"],
            output_activation=header["output_activation"],
        )
        return MultiViewAutoencoder(
            config, view,
            FeatureScaler.from_dict(header["scaler_task"]),
            FeatureScaler.from_dict(header["scaler_rest"]),
            blocks["encoder_task"], blocks["encoder_rest"],
            blocks["decoder_task"], blocks["decoder_rest"],
            epoch_losses=[],
        )
    if kind in ("monomodal-task", "monomodal-rest", "concat-ae"):
        config = ArchitectureConfig(
            kind=kind,
            enc=header["enc"],
            hidden_dims=tuple(header["hidden_dims"]),
            hidden_activation=header["hidden_activation"],
            output_activation=header["output_activation"],
        )
        return ConcatAutoencoder(
            config, view, FeatureScaler.from_dict(header["scaler"]),
            blocks["encoder"], blocks["decoder"], epoch_losses=[],
        )
    raise ValueError(f"unknown representation kind {kind!r}")


# --- fit specs consumed by the evaluation harness ---------------------------


@dataclass
class AutoencoderSpec:
    """Recipe for fitting an autoencoder representation on training subjects."""

    config: ArchitectureConfig
    epochs: int = 300
    batch_size: int = 500
    learning_rate: float = 1e-3

    def fit(self, subjects: list[SubjectRecord], seed: int):
        data = stack_views(subjects)
        if self.config.kind == "mdae":
            return train_mdae(
                data, self.config, seed,
                epochs=self.epochs, batch_size=self.batch_size,
                learning_rate=self.learning_rate,
            )
        return train_concat_ae(
            data, self.config, seed,
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate,
        )


@dataclass
class PcaSpec:
    """Recipe for the PCA baseline over standardized concatenated views."""

    enc: int

    def fit(self, subjects: list[SubjectRecord], seed: int) -> PcaRepresentation:
        x_task, x_rest = stack_views(subjects)
        x = np.concatenate([x_task, x_rest], axis=1)
        scaler = FeatureScaler.fit(x)
        model = fit_pca(scaler.transform(x), self.enc, seed=seed)
        return PcaRepresentation(scaler, model)


@dataclass
class RawSpec:
    """Identity representation (truncated/padded to ``columns`` if set)."""

    columns: int | None = None

    def fit(self, subjects: list[SubjectRecord], seed: int) -> RawRepresentation:
        return RawRepresentation(columns=self.columns)


@dataclass
class OracleSpec:
    """Fixed known latents keyed by subject id (bypasses fitting)."""

    latents: Mapping[str, np.ndarray]

    def fit(self, subjects: list[SubjectRecord], seed: int) -> OracleRepresentation:
        return OracleRepresentation(self.latents)
