"""Joint, cycle and unary adversarial games, gradient penalty and the training loop."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import netcore
from .generator import Generator, RelaxedGraph, sample_graphs
from .molgraph import QM9_VOCAB, AtomVocabulary, MolecularGraph, validate
from .penalties import PenaltyWeights, connectivity_penalty, valence_penalty

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ablation:
    connectivity: bool = True
    valence: bool = True
    unary_D: bool = True
    joint_D: bool = True
    cycle_D: bool = True
    gin_skip: bool = True
    generator_skip: bool = True
    attention: bool = True

    @property
    def uses_encoder(self) -> bool:
        return self.joint_D or self.cycle_D


ABLATIONS: dict[str, Ablation] = {
    "ALMGIG": Ablation(),
    "No Connectivity": Ablation(connectivity=False),
    "No Valence": Ablation(valence=False),
    "No Conn+Valence": Ablation(connectivity=False, valence=False),
    "No GIN SC": Ablation(gin_skip=False),
    "No Generator SC": Ablation(generator_skip=False),
    "No Attention": Ablation(attention=False),
    "ALICE": Ablation(unary_D=False),
    "ALI": Ablation(unary_D=False, cycle_D=False),
    "(W)GAN": Ablation(joint_D=False, cycle_D=False),
}

# published weight counts, used only for a sanity warning
REFERENCE_PARAMETERS = {
    "ALMGIG": 1.11e6, "No GIN SC": 1.03e6, "No Generator SC": 1.10e6, "No Attention": 1.03e6,
    "ALICE": 987e3, "ALI": 729e3, "(W)GAN": 509e3,
}


@dataclass
class TrainConfig:
    epochs: int = 250
    batch_size: int = 128
    lr_generator: float = 1e-3
    lr_discriminator: float = 4e-4
    betas: tuple[float, float] = (0.5, 0.9)
    lr_milestones: tuple[int, ...] = (80, 150, 200)
    lr_factors: tuple[float, ...] = (0.5, 0.1, 0.01)
    gp_weight: float = 10.0
    variance_weight: float = 0.2
    penalties: PenaltyWeights = field(default_factory=PenaltyWeights)
    ablation: Ablation = field(default_factory=Ablation)
    ablation_name: str = "ALMGIG"
    latent_dim: int = 96
    noise_dim: int = 96
    tau: float = 1.0
    generator_loss: str = "non_saturating"
    penalize_reconstruction: bool = True
    cycle_shared: bool = False
    probe_size: int = 256
    checkpoint_every: int = 10
    seed: int = 0
    threads: int = 1
    dtype: str = "float32"

    def __post_init__(self):
        if self.generator_loss not in ("non_saturating", "saturating"):
            raise ValueError(f"unknown generator_loss {self.generator_loss!r}")
        if len(self.lr_milestones) != len(self.lr_factors):
            raise ValueError("lr_milestones and lr_factors differ in length")
        if list(self.lr_milestones) != sorted(self.lr_milestones):
            raise ValueError("lr_milestones must be increasing")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.latent_dim % 3:
            raise ValueError("latent_dim must be divisible by 3")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        name = d.get("ablation_name", "ALMGIG")
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation {name!r}; choose from {list(ABLATIONS)}")
        abl = ABLATIONS[name]
        if isinstance(d.get("ablation"), dict):
            abl = replace(abl, **d["ablation"])
        d["ablation"] = abl
        if isinstance(d.get("penalties"), dict):
            d["penalties"] = PenaltyWeights(**d["penalties"])
        for key in ("betas", "lr_milestones", "lr_factors"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def preset(cls, name: str, **overrides) -> "TrainConfig":
        return cls.from_dict({"ablation_name": name, **overrides})

    def to_dict(self) -> dict:
        return netcore._jsonable(self)

    def lr_factor(self, epoch: int) -> float:
        """Multiplier on the initial rates for 0-based ``epoch``."""
        factor = 1.0
        for milestone, f in zip(self.lr_milestones, self.lr_factors):
            if epoch >= milestone:
                factor = f
        return factor


# networks ---------------------------------------------------------------------

class ALIModel(nn.Module):
    """Generator, encoder and discriminators for one ablation setting."""

    def __init__(self, config: TrainConfig, vocab: AtomVocabulary = QM9_VOCAB):
        super().__init__()
        abl = config.ablation
        gin = netcore.GinConfig(node_dim=vocab.d + 1, n_edge_types=vocab.m,
                                skip=abl.gin_skip, attention=abl.attention)
        # without an encoder there is nothing to pair the generator noise with
        self.noise_dim = config.noise_dim if abl.uses_encoder else 0
        self.latent_dim = config.latent_dim
        self.vocab = vocab
        self.generator = Generator(vocab, config.latent_dim, self.noise_dim, skip=abl.generator_skip)
        self.encoder = netcore.Encoder(gin, config.noise_dim, latent_dim=config.latent_dim) if abl.uses_encoder else None
        self.d_joint = netcore.JointDiscriminator(gin, config.latent_dim) if abl.joint_D else None
        self.d_cycle = netcore.CycleDiscriminator(gin, shared=config.cycle_shared) if abl.cycle_D else None
        self.d_unary = netcore.UnaryDiscriminator(gin) if abl.unary_D else None

    def generator_side(self) -> list[nn.Parameter]:
        mods = [self.generator, self.encoder]
        return [p for m in mods if m is not None for p in m.parameters()]

    def discriminator_side(self) -> list[nn.Parameter]:
        mods = [self.d_joint, self.d_cycle, self.d_unary]
        return [p for m in mods if m is not None for p in m.parameters()]


def build_model(config: TrainConfig, vocab: AtomVocabulary = QM9_VOCAB) -> ALIModel:
    torch.manual_seed(config.seed)
    model = ALIModel(config, vocab).to(getattr(torch, config.dtype))
    n = netcore.count_parameters(model)
    ref = REFERENCE_PARAMETERS.get(config.ablation_name)
    if ref is not None and abs(n - ref) > 0.2 * ref:
        log.warning("model has %d parameters, more than 20%% away from %d", n, ref)
    return model


# losses -----------------------------------------------------------------------

def gan_losses(d_real: torch.Tensor, d_fake: torch.Tensor, form: str = "non_saturating"):
    """Discriminator loss -E log s(d_real) - E log(1 - s(d_fake)) and its adversarial counterpart."""
    loss_d = F.softplus(-d_real).mean() + F.softplus(d_fake).mean()
    if form == "non_saturating":
        loss_g = F.softplus(d_real).mean() + F.softplus(-d_fake).mean()
    else:
        loss_g = -loss_d
    return loss_d, loss_g


def ali_objective(d_joint, X, A, z_enc, fake: RelaxedGraph, z, form="non_saturating"):
    """Returns (loss_D, loss_EG, logits on the generated pairs)."""
    d_real = d_joint(X, A, z_enc)
    d_fake = d_joint(fake.X, fake.A, z)
    loss_d, loss_g = gan_losses(d_real, d_fake, form)
    return loss_d, loss_g, d_fake


def cycle_objective(d_cycle, X, A, recon: RelaxedGraph, form="non_saturating"):
    d_real = d_cycle(X, A, X, A)
    d_fake = d_cycle(X, A, recon.X, recon.A)
    return gan_losses(d_real, d_fake, form)


def unary_objective(d_unary, X, A, fake: RelaxedGraph, form="non_saturating"):
    return gan_losses(d_unary(X, A), d_unary(fake.X, fake.A), form)


def gradient_penalty(D, real: tuple, fake: tuple, weight: float = 10.0,
                     generator: torch.Generator | None = None, alpha: torch.Tensor | None = None):
    """weight * E[(|grad D(x_hat)| - 1)^2], one mixing coefficient per sample shared by all inputs."""
    if len(real) != len(fake):
        raise ValueError("real and fake input tuples differ in length")
    b = real[0].shape[0]
    if alpha is None:
        alpha = torch.rand(b, generator=generator, dtype=real[0].dtype)
    mixed = []
    for r, f in zip(real, fake):
        a = alpha.reshape((b,) + (1,) * (r.dim() - 1))
        mixed.append((a * r.detach() + (1 - a) * f.detach()).requires_grad_(True))
    out = D(*mixed)
    grads = torch.autograd.grad(out.sum(), mixed, create_graph=True, allow_unused=True)
    flat = [g.reshape(b, -1) for g in grads if g is not None]
    flat = torch.cat(flat, dim=1) if flat else torch.zeros(b, 1, dtype=real[0].dtype)
    # vector_norm has a zero subgradient at 0, unlike sqrt of the sum of squares
    norm = torch.linalg.vector_norm(flat, dim=-1)
    return weight * ((norm - 1) ** 2).mean()


def variance_discount(logits: torch.Tensor, weight: float = 0.2) -> torch.Tensor:
    """-weight * population variance; zero for a batch of one."""
    if logits.numel() < 2:
        return logits.sum() * 0
    return -weight * logits.var(unbiased=False)


# training ---------------------------------------------------------------------

class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainResult:
    model: ALIModel
    log_path: Path | None
    checkpoints: list[Path]
    history: list[dict]


def _noise(model: ALIModel, b: int, rng: torch.Generator, dtype):
    z = torch.randn(b, model.latent_dim, generator=rng, dtype=dtype)
    eps_g = torch.randn(b, model.noise_dim, generator=rng, dtype=dtype)
    eps_e = torch.randn(b, model.noise_dim if model.encoder is not None else 0, generator=rng, dtype=dtype)
    eps_r = torch.randn(b, model.noise_dim, generator=rng, dtype=dtype)
    return z, eps_g, eps_e, eps_r


def forward_paths(model: ALIModel, X, A, noise, tau: float, rng: torch.Generator):
    """Generated sample, encoding and reconstruction for one batch."""
    z, eps_g, eps_e, eps_r = noise
    fake = model.generator(z, eps_g, tau, generator=rng)
    z_enc = recon = None
    if model.encoder is not None:
        z_enc = model.encoder(X, A, eps_e)
        if model.d_cycle is not None:
            recon = model.generator(z_enc, eps_r, tau, generator=rng)
    return fake, z_enc, recon


def generator_terms(model: ALIModel, config: TrainConfig, X, A, noise, rng) -> dict[str, torch.Tensor]:
    """Named encoder/decoder loss terms; disabled components are absent."""
    abl, form = config.ablation, config.generator_loss
    fake, z_enc, recon = forward_paths(model, X, A, noise, config.tau, rng)
    terms: dict[str, torch.Tensor] = {}
    if model.d_joint is not None:
        _, terms["joint"], d_fake = ali_objective(model.d_joint, X, A, z_enc, fake, noise[0], form)
        terms["variance"] = variance_discount(d_fake, config.variance_weight)
    if model.d_cycle is not None:
        terms["cycle"] = cycle_objective(model.d_cycle, X, A, recon, form)[1]
    if model.d_unary is not None:
        terms["unary"] = unary_objective(model.d_unary, X, A, fake, form)[1]
    paths = [fake] + ([recon] if recon is not None and config.penalize_reconstruction else [])
    if abl.connectivity:
        terms["connectivity"] = sum(connectivity_penalty(p, config.penalties) for p in paths)
    if abl.valence:
        terms["valence"] = sum(valence_penalty(p, model.vocab, config.penalties) for p in paths)
    return terms


def discriminator_terms(model: ALIModel, config: TrainConfig, X, A, noise, rng) -> dict[str, torch.Tensor]:
    with torch.no_grad():
        fake, z_enc, recon = forward_paths(model, X, A, noise, config.tau, rng)
    z = noise[0]
    lam = config.gp_weight
    terms: dict[str, torch.Tensor] = {}
    if model.d_joint is not None:
        terms["joint"] = ali_objective(model.d_joint, X, A, z_enc, fake, z)[0]
        terms["gp_joint"] = gradient_penalty(model.d_joint, (X, A, z_enc), (fake.X, fake.A, z), lam, rng)
    if model.d_cycle is not None:
        terms["cycle"] = cycle_objective(model.d_cycle, X, A, recon)[0]
        terms["gp_cycle"] = gradient_penalty(model.d_cycle, (X, A, X, A), (X, A, recon.X, recon.A), lam, rng)
    if model.d_unary is not None:
        terms["unary"] = unary_objective(model.d_unary, X, A, fake)[0]
        terms["gp_unary"] = gradient_penalty(model.d_unary, (X, A), (fake.X, fake.A), lam, rng)
    return terms


def _check_finite(terms: dict, where: str, batch: dict, dump_dir: Path | None, tag: str):
    bad = [k for k, v in terms.items() if not torch.isfinite(v).all()]
    if not bad:
        return
    msg = f"non-finite {where} loss terms {bad} at {tag}"
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        path = dump_dir / f"nan_batch_{tag}.npz"
        np.savez(path, **{k: v.detach().cpu().numpy() for k, v in batch.items()})
        msg += f"; batch dumped to {path}"
    raise TrainingDiverged(msg)


def probe_validity(model: ALIModel, n: int, seed: int) -> float:
    graphs = sample_graphs(model.generator, n, seed, latent_dim=model.latent_dim, noise_dim=model.noise_dim)
    return sum(validate(g).is_valid for g in graphs) / max(n, 1)


def _set_lr(opt: torch.optim.Optimizer, lr: float):
    for group in opt.param_groups:
        group["lr"] = lr


def generator_step(model: ALIModel, config: TrainConfig, opt, X, A, rng, dump_dir=None, tag="") -> dict:
    """One encoder/decoder update with the discriminators frozen."""
    d_params = model.discriminator_side()
    for p in d_params:
        p.requires_grad_(False)
    try:
        noise = _noise(model, len(X), rng, X.dtype)
        terms = generator_terms(model, config, X, A, noise, rng)
        _check_finite(terms, "generator", {"X": X, "A": A, "z": noise[0]}, dump_dir, tag)
        opt.zero_grad(set_to_none=True)
        sum(terms.values()).backward()
        opt.step()
    finally:
        for p in d_params:
            p.requires_grad_(True)
    return terms


def discriminator_step(model: ALIModel, config: TrainConfig, opt, X, A, rng, dump_dir=None, tag="") -> dict:
    """One discriminator update on fresh noise; generated samples carry no graph."""
    noise = _noise(model, len(X), rng, X.dtype)
    terms = discriminator_terms(model, config, X, A, noise, rng)
    _check_finite(terms, "discriminator", {"X": X, "A": A, "z": noise[0]}, dump_dir, tag)
    opt.zero_grad(set_to_none=True)
    sum(terms.values()).backward()
    opt.step()
    return terms


def train(config: TrainConfig, train_graphs: list[MolecularGraph], out_dir=None,
          vocab: AtomVocabulary = QM9_VOCAB, progress=None) -> TrainResult:
    """Alternating 1:1 updates, generator side first. Writes metrics.jsonl and checkpoints under out_dir."""
    if config.threads:
        torch.set_num_threads(config.threads)
    dtype = getattr(torch, config.dtype)
    out_dir = Path(out_dir) if out_dir is not None else None
    model = build_model(config, vocab)
    opt_g = torch.optim.Adam(model.generator_side(), lr=config.lr_generator, betas=config.betas)
    opt_d = (torch.optim.Adam(model.discriminator_side(), lr=config.lr_discriminator, betas=config.betas)
             if model.discriminator_side() else None)

    X_all = torch.from_numpy(np.stack([g.X for g in train_graphs])).to(dtype)
    A_all = torch.from_numpy(np.stack([g.A for g in train_graphs])).to(dtype)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    order_rng = np.random.default_rng(seeds[0])
    noise_rng = torch.Generator().manual_seed(int(seeds[1].generate_state(1)[0]))

    log_path = None
    checkpoints: list[Path] = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "metrics.jsonl"
        log_path.write_text("")
    history = []
    step = 0
    n = len(train_graphs)
    for epoch in range(config.epochs):
        factor = config.lr_factor(epoch)
        _set_lr(opt_g, config.lr_generator * factor)
        if opt_d is not None:
            _set_lr(opt_d, config.lr_discriminator * factor)
        sums: dict[str, float] = {}
        counts = 0
        t0 = time.perf_counter()
        perm = order_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = torch.from_numpy(perm[start:start + config.batch_size])
            X, A = X_all[idx], A_all[idx]
            b = len(idx)
            tag = f"e{epoch}_s{step}"

            g_terms = generator_step(model, config, opt_g, X, A, noise_rng, out_dir, tag)
            d_terms = discriminator_step(model, config, opt_d, X, A, noise_rng, out_dir, tag) if opt_d else {}

            for prefix, terms in (("EG", g_terms), ("D", d_terms)):
                for k, v in terms.items():
                    key = f"{prefix}_{k}"
                    sums[key] = sums.get(key, 0.0) + float(v.detach()) * b
            counts += b
            step += 1
        model.eval()
        validity = probe_validity(model, config.probe_size, config.seed + 7919) if config.probe_size else None
        model.train()
        record = {
            "epoch": epoch + 1,
            "step": step,
            "lr_generator": opt_g.param_groups[0]["lr"],
            "lr_discriminator": opt_d.param_groups[0]["lr"] if opt_d else None,
            "losses": {k: v / max(counts, 1) for k, v in sums.items()},
            "probe_validity": validity,
        }
        history.append(record)
        if log_path is not None:
            with open(log_path, "a") as fh:
                fh.write(json.dumps(record) + "\n")
        if progress is not None:
            progress(record, time.perf_counter() - t0)
        last = epoch + 1 == config.epochs
        if out_dir is not None and (last or (config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0)):
            path = out_dir / "checkpoints" / f"epoch_{epoch + 1:04d}.npz"
            netcore.save_checkpoint(path, model, config.to_dict(), {"epoch": epoch + 1, "step": step})
            checkpoints.append(path)
    return TrainResult(model, log_path, checkpoints, history)


def load_model(path, vocab: AtomVocabulary = QM9_VOCAB) -> tuple[ALIModel, TrainConfig]:
    header, arrays = netcore.read_checkpoint(path)
    config = TrainConfig.from_dict(header["config"])
    model = ALIModel(config, vocab).to(getattr(torch, config.dtype))
    netcore.load_state(model, arrays)
    model.eval()
    return model, config
