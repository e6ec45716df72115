import numpy as np
import pytest
import torch

import suites
from helpers import random_relaxed
from molali import netcore
from molali.adversarial import ABLATIONS, REFERENCE_PARAMETERS, ALIModel, TrainConfig
from molali.molgraph import MolecularGraph


def test_gin_layer_zero_maps():
    layer = netcore.GINLayer(5, 7, 3)
    for lin in layer.maps:
        torch.nn.init.zeros_(lin.weight)
        torch.nn.init.zeros_(lin.bias)
    A, X = random_relaxed(np.random.default_rng(0), dtype=torch.float32)
    assert torch.count_nonzero(layer(X, A)) == 0


def test_gin_layer_isolated_identity():
    layer = netcore.GINLayer(5, 5, 3)
    with torch.no_grad():
        for k, lin in enumerate(layer.maps):
            lin.weight.copy_(torch.eye(5) if k == 0 else torch.zeros(5, 5))
            lin.bias.zero_()
    g = MolecularGraph.from_atoms_bonds(["C", "O"], [])
    X = torch.tensor(g.X)[None] * 0.7
    A = torch.tensor(g.A)[None]
    assert torch.allclose(layer(X, A), torch.tanh(X))


def test_gin_layer_shape_error():
    layer = netcore.GINLayer(5, 8, 3)
    with pytest.raises(ValueError):
        layer(torch.zeros(1, 9, 5), torch.zeros(1, 9, 9, 3))


def test_pool_single_node():
    pool = netcore.GraphPool(4, 6)
    h = torch.randn(1, 1, 4)
    hc = torch.tanh(pool.proj(h))
    expected = (torch.sigmoid(pool.gate(hc)) * hc)[:, 0]
    assert torch.allclose(pool([h]), expected)


def test_pool_closed_gate():
    pool = netcore.GraphPool(4, 6)
    with torch.no_grad():
        pool.gate.weight.zero_()
        pool.gate.bias.fill_(-50.0)
    assert pool([torch.randn(2, 9, 4)]).abs().max() < 1e-12


def test_no_skip_pool_sees_last_layer_only():
    gin = netcore.GIN(netcore.GinConfig(skip=False))
    assert gin.pool.proj.in_features == 128
    assert netcore.GIN(netcore.GinConfig()).pool.proj.in_features == 5 + 128 + 128


def test_encoder_shape_and_determinism():
    enc = netcore.Encoder()
    A, X = random_relaxed(np.random.default_rng(1), b=3, dtype=torch.float32)
    eps = torch.randn(3, 96)
    z = enc(X, A, eps)
    assert z.shape == (3, 96)
    assert torch.equal(z, enc(X, A, eps))


def test_discriminator_shapes():
    A, X = random_relaxed(np.random.default_rng(2), b=3, dtype=torch.float32)
    assert netcore.JointDiscriminator()(X, A, torch.randn(3, 96)).shape == (3,)
    assert netcore.UnaryDiscriminator()(X, A).shape == (3,)
    cyc = netcore.CycleDiscriminator()
    out = cyc(X, A, X, A)
    assert out.shape == (3,) and torch.isfinite(out).all() and torch.equal(out, cyc(X, A, X, A))


def test_cycle_sharing_switch():
    shared = netcore.CycleDiscriminator(shared=True)
    separate = netcore.CycleDiscriminator(shared=False)
    assert shared.gin1 is shared.gin2
    per_gin = netcore.count_parameters(separate.gin1)
    assert netcore.count_parameters(separate) - netcore.count_parameters(shared) == per_gin


@pytest.mark.parametrize("name", sorted(REFERENCE_PARAMETERS))
def test_parameter_counts_near_reference(name):
    model = ALIModel(TrainConfig.preset(name))
    n = netcore.count_parameters(model)
    assert abs(n - REFERENCE_PARAMETERS[name]) <= 0.01 * REFERENCE_PARAMETERS[name]


def test_checkpoint_round_trip(tmp_path):
    torch.manual_seed(0)
    a, b = netcore.UnaryDiscriminator(), netcore.UnaryDiscriminator()
    path = netcore.save_checkpoint(tmp_path / "d.npz", a, {"units": 128}, {"epoch": 3})
    header, arrays = netcore.read_checkpoint(path)
    assert header["config"] == {"units": 128} and header["extra"] == {"epoch": 3}
    netcore.load_state(b, arrays)
    X = torch.rand(2, 9, 5)
    A = torch.rand(2, 9, 9, 4)
    assert torch.equal(a(X, A), b(X, A))
    assert not list(tmp_path.glob("*.tmp"))


def test_checkpoint_rejects_foreign_file(tmp_path):
    np.savez(tmp_path / "x.npz", __header__=np.frombuffer(b'{"format": "other"}', dtype=np.uint8))
    with pytest.raises(ValueError):
        netcore.read_checkpoint(tmp_path / "x.npz")


def test_gradients_gin_and_pool():
    assert suites.fd_gin_layer(configs=5) <= 1e-4
    assert suites.fd_pool(configs=5) <= 1e-4


@pytest.mark.parametrize("kind", ["joint", "cycle", "unary"])
def test_gradients_discriminators(kind):
    assert suites.fd_discriminator(kind, configs=5) <= 1e-4


def test_permutation_invariance():
    dev = suites.permutation_suite(perms=10)
    assert max(dev.values()) <= 1e-5, dev
