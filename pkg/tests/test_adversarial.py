import hashlib
import json
import math

import numpy as np
import pytest
import torch

from helpers import directional_check, param_check, random_relaxed, small_corpus
from molali import adversarial as adv
from molali import netcore
from molali.generator import RelaxedGraph

LOG_HALF = math.log(0.5)


class ConstD(torch.nn.Module):
    def __init__(self, value=0.0):
        super().__init__()
        self.w = torch.nn.Parameter(torch.zeros(()))
        self.value = value

    def forward(self, *xs):
        return self.w * 0 + self.value + 0 * sum(x.sum((tuple(range(1, x.dim())))) for x in xs)


class LinearD(torch.nn.Module):
    """Logit = <w, flattened first input>, with |w| = 1."""

    def __init__(self, dim):
        super().__init__()
        w = torch.randn(dim, dtype=torch.float64)
        self.w = torch.nn.Parameter(w / w.norm())

    def forward(self, x, *rest):
        return x.reshape(len(x), -1) @ self.w


def _batch(n=4, dtype=torch.float64):
    graphs = small_corpus()[10:10 + n]
    X = torch.tensor(np.stack([g.X for g in graphs]), dtype=dtype)
    A = torch.tensor(np.stack([g.A for g in graphs]), dtype=dtype)
    return X, A


# config --------------------------------------------------------------------------

def test_defaults_match_hyperparameters():
    c = adv.TrainConfig()
    assert (c.epochs, c.lr_generator, c.lr_discriminator, c.betas) == (250, 1e-3, 4e-4, (0.5, 0.9))
    assert (c.gp_weight, c.variance_weight, c.latent_dim, c.tau) == (10.0, 0.2, 96, 1.0)
    assert (c.penalties.mu, c.penalties.nu, c.penalties.a) == (0.005, 0.05, 100.0)


def test_lr_schedule():
    c = adv.TrainConfig()
    factors = [c.lr_factor(e) for e in range(250)]
    assert factors[79] == 1 and factors[80] == 0.5 and factors[150] == 0.1 and factors[200] == 0.01
    assert all(a >= b for a, b in zip(factors, factors[1:]))


def test_presets_and_round_trip():
    ali = adv.TrainConfig.preset("ALI")
    assert not ali.ablation.unary_D and not ali.ablation.cycle_D and ali.ablation.joint_D
    wgan = adv.TrainConfig.preset("(W)GAN")
    assert not wgan.ablation.joint_D and not wgan.ablation.cycle_D and not wgan.ablation.uses_encoder
    back = adv.TrainConfig.from_dict(json.loads(json.dumps(ali.to_dict())))
    assert back == ali
    with pytest.raises(ValueError):
        adv.TrainConfig.from_dict({"lr": 1})
    with pytest.raises(ValueError):
        adv.TrainConfig.preset("No Such Row")
    assert set(adv.ABLATIONS) == {"ALMGIG", "No Connectivity", "No Valence", "No Conn+Valence", "No GIN SC",
                                  "No Generator SC", "No Attention", "ALICE", "ALI", "(W)GAN"}


# losses --------------------------------------------------------------------------

def test_gan_losses_constant_zero_logit():
    zeros = torch.zeros(5)
    loss_d, loss_g = adv.gan_losses(zeros, zeros)
    assert float(loss_d) == pytest.approx(-2 * LOG_HALF)
    assert float(loss_g) == pytest.approx(-2 * LOG_HALF)
    assert float(adv.gan_losses(zeros, zeros, "saturating")[1]) == pytest.approx(2 * LOG_HALF)


def test_objectives_with_constant_discriminator():
    X, A = _batch()
    fake = RelaxedGraph(*random_relaxed(np.random.default_rng(0), b=4))
    z = torch.randn(4, 96, dtype=torch.float64)
    d = ConstD()
    for loss_d in (adv.ali_objective(d, X, A, z, fake, z)[0], adv.cycle_objective(d, X, A, fake)[0],
                   adv.unary_objective(d, X, A, fake)[0]):
        assert float(loss_d.detach()) == pytest.approx(-2 * LOG_HALF)


def test_objective_losses_finite_over_seeds():
    X, A = _batch(2, torch.float32)
    for seed in range(100):
        model = adv.ALIModel(adv.TrainConfig(seed=seed))
        torch.manual_seed(seed)
        g = torch.Generator().manual_seed(seed)
        noise = adv._noise(model, 2, g, torch.float32)
        with torch.no_grad():
            terms = adv.generator_terms(model, adv.TrainConfig(), X, A, noise, g)
        assert all(torch.isfinite(v) for v in terms.values())
        if seed >= 10:  # full discriminator terms are slower; the first ten seeds cover them
            continue
        d_terms = adv.discriminator_terms(model, adv.TrainConfig(), X, A, noise, g)
        assert all(torch.isfinite(v) for v in d_terms.values())


def test_discriminator_loss_parameter_gradients():
    rng = np.random.default_rng(0)
    X, A = _batch(2)
    small = netcore.GinConfig(units=16, pool_units=16, head_units=(16, 8))
    torch.manual_seed(0)
    D = netcore.JointDiscriminator(small, z_units=16).to(torch.float64)
    fake = RelaxedGraph(*random_relaxed(rng, b=2))
    z_enc, z = torch.randn(2, 96, dtype=torch.float64), torch.randn(2, 96, dtype=torch.float64)
    assert param_check(lambda: adv.ali_objective(D, X, A, z_enc, fake, z)[0], D, rng) <= 1e-4


def test_recon_shapes():
    X, A = _batch(3, torch.float32)
    model = adv.ALIModel(adv.TrainConfig())
    g = torch.Generator().manual_seed(0)
    fake, z_enc, recon = adv.forward_paths(model, X, A, adv._noise(model, 3, g, torch.float32), 1.0, g)
    assert recon.A.shape == A.shape and recon.X.shape == X.shape and z_enc.shape == (3, 96)


# gradient penalty ----------------------------------------------------------------

def test_gp_linear_unit_gradient_is_zero():
    X, A = _batch(3)
    fake = random_relaxed(np.random.default_rng(1), b=3)
    D = LinearD(9 * 5)
    assert float(adv.gradient_penalty(D, (X,), (fake[1],)).detach()) == pytest.approx(0, abs=1e-12)


def test_gp_constant_is_weight():
    X, A = _batch(3)
    Af, Xf = random_relaxed(np.random.default_rng(2), b=3)
    assert float(adv.gradient_penalty(ConstD(1.5), (X, A), (Xf, Af))) == pytest.approx(10.0)


def test_gp_shared_alpha_and_length_check():
    X, A = _batch(2)
    with pytest.raises(ValueError):
        adv.gradient_penalty(ConstD(), (X, A), (X,))
    alpha = torch.tensor([1.0, 0.0], dtype=torch.float64)
    seen = []

    def spy(x, a):
        seen.append((x.detach().clone(), a.detach().clone()))
        return (x.sum((1, 2)) + a.sum((1, 2, 3))) * 0.5

    Af, Xf = random_relaxed(np.random.default_rng(3), b=2)
    adv.gradient_penalty(spy, (X, A), (Xf, Af), alpha=alpha)
    x, a = seen[0]
    assert torch.equal(x[0], X[0]) and torch.equal(a[0], A[0])
    assert torch.equal(x[1], Xf[1]) and torch.equal(a[1], Af[1])


def test_gp_differentiable_in_parameters():
    rng = np.random.default_rng(4)
    X, A = _batch(2)
    Af, Xf = random_relaxed(rng, b=2)
    small = netcore.GinConfig(units=8, pool_units=8, head_units=(8,))
    torch.manual_seed(1)
    D = netcore.UnaryDiscriminator(small).to(torch.float64)
    alpha = torch.tensor([0.3, 0.8], dtype=torch.float64)
    err = param_check(lambda: adv.gradient_penalty(D, (X, A), (Xf, Af), alpha=alpha), D, rng, h=1e-5)
    assert err <= 1e-3


# variance discount ---------------------------------------------------------------

def test_variance_discount():
    assert float(adv.variance_discount(torch.full((5,), 3.0))) == 0
    assert float(adv.variance_discount(torch.tensor([0.0, 2.0]))) == pytest.approx(-0.2)
    assert float(adv.variance_discount(torch.tensor([1.0]))) == 0
    assert float(adv.variance_discount(torch.tensor([0.0, 4.0]))) < float(adv.variance_discount(torch.tensor([0.0, 2.0])))


# term bookkeeping ----------------------------------------------------------------

def _terms(name):
    cfg = adv.TrainConfig.preset(name)
    model = adv.ALIModel(cfg)
    X, A = _batch(2, torch.float32)
    g = torch.Generator().manual_seed(0)
    noise = adv._noise(model, 2, g, torch.float32)
    gt = adv.generator_terms(model, cfg, X, A, noise, g)
    dt = adv.discriminator_terms(model, cfg, X, A, adv._noise(model, 2, g, torch.float32), g)
    return set(gt), set(dt)


@pytest.mark.parametrize("name, g_terms, d_terms", [
    ("ALMGIG", {"joint", "variance", "cycle", "unary", "connectivity", "valence"},
     {"joint", "gp_joint", "cycle", "gp_cycle", "unary", "gp_unary"}),
    ("ALI", {"joint", "variance", "connectivity", "valence"}, {"joint", "gp_joint"}),
    ("ALICE", {"joint", "variance", "cycle", "connectivity", "valence"}, {"joint", "gp_joint", "cycle", "gp_cycle"}),
    ("(W)GAN", {"unary", "connectivity", "valence"}, {"unary", "gp_unary"}),
    ("No Conn+Valence", {"joint", "variance", "cycle", "unary"},
     {"joint", "gp_joint", "cycle", "gp_cycle", "unary", "gp_unary"}),
])
def test_ablation_terms(name, g_terms, d_terms):
    assert _terms(name) == (g_terms, d_terms)


def _digest(params):
    h = hashlib.sha256()
    for p in params:
        h.update(p.detach().numpy().tobytes())
    return h.hexdigest()


def test_steps_touch_only_their_side():
    cfg = adv.TrainConfig(batch_size=4)
    model = adv.build_model(cfg)
    opt_g = torch.optim.Adam(model.generator_side(), lr=1e-3, betas=cfg.betas)
    opt_d = torch.optim.Adam(model.discriminator_side(), lr=4e-4, betas=cfg.betas)
    X, A = _batch(4, torch.float32)
    g = torch.Generator().manual_seed(0)
    before_g, before_d = _digest(model.generator_side()), _digest(model.discriminator_side())
    adv.generator_step(model, cfg, opt_g, X, A, g)
    assert _digest(model.discriminator_side()) == before_d
    assert _digest(model.generator_side()) != before_g
    assert all(p.requires_grad for p in model.discriminator_side())
    mid_g = _digest(model.generator_side())
    adv.discriminator_step(model, cfg, opt_d, X, A, g)
    assert _digest(model.generator_side()) == mid_g
    assert _digest(model.discriminator_side()) != before_d


def test_nan_aborts_with_dump(tmp_path):
    terms = {"joint": torch.tensor(float("nan"))}
    with pytest.raises(adv.TrainingDiverged):
        adv._check_finite(terms, "generator", {"X": torch.zeros(1)}, tmp_path, "e0_s0")
    assert (tmp_path / "nan_batch_e0_s0.npz").exists()


# training loop -------------------------------------------------------------------

def test_short_run_log_and_determinism(tmp_path):
    graphs = small_corpus()
    cfg = adv.TrainConfig(epochs=2, batch_size=16, probe_size=32, checkpoint_every=1, seed=3,
                          lr_milestones=(1,), lr_factors=(0.5,))
    r1 = adv.train(cfg, graphs, tmp_path / "a")
    r2 = adv.train(cfg, graphs, tmp_path / "b")
    lines = r1.log_path.read_text().splitlines()
    assert lines == r2.log_path.read_text().splitlines()
    records = [json.loads(l) for l in lines]
    assert [r["epoch"] for r in records] == [1, 2]
    lrs = [r["lr_generator"] for r in records]
    assert lrs == [1e-3, 5e-4]
    assert set(records[0]["losses"]) == {"EG_joint", "EG_variance", "EG_cycle", "EG_unary", "EG_connectivity",
                                         "EG_valence", "D_joint", "D_gp_joint", "D_cycle", "D_gp_cycle",
                                         "D_unary", "D_gp_unary"}
    assert len(r1.checkpoints) == 2
    model, config = adv.load_model(r1.checkpoints[-1])
    assert config == cfg
    for a, b in zip(model.parameters(), r1.model.parameters()):
        assert torch.equal(a, b)


def test_first_steps_finite_across_seeds():
    graphs = small_corpus()
    for seed in range(5):
        cfg = adv.TrainConfig(epochs=1, batch_size=8, probe_size=0, seed=seed)
        result = adv.train(cfg, graphs)
        assert all(math.isfinite(v) for v in result.history[0]["losses"].values())
