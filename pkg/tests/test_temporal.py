"""Time residual gate, cosine position code, and window attention."""

import math

import numpy as np
import pytest
import torch

from evocast.errors import RangeError, ShapeError
from evocast.temporal import TimeResidualGate, WindowAttention

from oracles import attention_oracle, gate_oracle, position_encoding_oracle


def rand(shape, seed):
    return torch.tensor(np.random.default_rng(seed).normal(size=shape), dtype=torch.float64)


# ---------------------------------------------------------------------------
# gate


def test_gate_zero_params_is_midpoint():
    gate = TimeResidualGate(4).double()
    with torch.no_grad():
        gate.w3.weight.zero_()
        gate.w3.bias.zero_()
        h_new, h_prev = rand((3, 4), 0), rand((3, 4), 1)
        out = gate(h_new, h_prev)
    assert torch.allclose(out, (h_new + h_prev) / 2.0, atol=1e-12)


def test_gate_equal_inputs_passthrough():
    torch.manual_seed(0)
    gate = TimeResidualGate(4).double()
    h = rand((3, 4), 2)
    with torch.no_grad():
        out = gate(h, h.clone())
    assert torch.allclose(out, h, atol=1e-12)


def test_gate_matches_elementwise_oracle():
    torch.manual_seed(1)
    gate = TimeResidualGate(5).double()
    h_new, h_prev = rand((4, 5), 3), rand((4, 5), 4)
    with torch.no_grad():
        got = gate(h_new, h_prev).numpy()
    want = gate_oracle(
        h_new.numpy(),
        h_prev.numpy(),
        gate.w3.weight.detach().numpy(),
        gate.w3.bias.detach().numpy(),
    )
    assert np.allclose(got, want, atol=1e-9)


def test_gate_output_between_inputs():
    torch.manual_seed(2)
    gate = TimeResidualGate(6).double()
    h_new, h_prev = rand((5, 6), 5), rand((5, 6), 6)
    with torch.no_grad():
        out = gate(h_new, h_prev)
    low = torch.minimum(h_new, h_prev)
    high = torch.maximum(h_new, h_prev)
    assert bool((out >= low - 1e-12).all()) and bool((out <= high + 1e-12).all())


def test_gate_shape_mismatch_rejected():
    gate = TimeResidualGate(4)
    with pytest.raises(ShapeError):
        gate(torch.rand(2, 4), torch.rand(3, 4))


# ---------------------------------------------------------------------------
# position encoding


def test_position_encoding_zero_frequencies():
    att = WindowAttention(4).double()
    with torch.no_grad():
        att.omega.zero_()
        phi = att.position_encoding(5)
    assert torch.allclose(phi, torch.full((4,), math.sqrt(0.25), dtype=torch.float64))


def test_position_encoding_cos_pi():
    att = WindowAttention(1).double()
    with torch.no_grad():
        att.omega.fill_(math.pi)
        phi = att.position_encoding(1)
    assert phi.item() == pytest.approx(-1.0, abs=1e-12)


def test_position_encoding_matches_oracle():
    att = WindowAttention(8).double()
    with torch.no_grad():
        att.omega.copy_(rand((8,), 7))
        got = att.position_encoding(13).numpy()
    assert np.allclose(got, position_encoding_oracle(13, att.omega.detach().numpy()), atol=1e-12)


def test_position_encoding_norm_bounded():
    att = WindowAttention(6).double()
    with torch.no_grad():
        att.omega.copy_(rand((6,), 8))
        phi = att.position_encoding(3)
    assert float(phi.norm()) <= 1.0 + 1e-12


def test_omega_geometric_init():
    att = WindowAttention(4)
    want = [1.0 / (10000.0 ** (2.0 * k / 4)) for k in range(4)]
    assert np.allclose(att.omega.detach().numpy(), want, atol=1e-7)


# ---------------------------------------------------------------------------
# attention


def test_attention_single_position_identity():
    torch.manual_seed(3)
    att = WindowAttention(4).double()
    z = rand((1, 2, 8), 9)
    with torch.no_grad():
        enc = att.encode(z)
    assert torch.allclose(enc, z, atol=1e-9)


def test_attention_zero_query_uniform_mean():
    torch.manual_seed(4)
    att = WindowAttention(4).double()
    with torch.no_grad():
        att.w_q.weight.zero_()
        z = rand((5, 3, 8), 10)
        enc = att.encode(z)
    want = z.mean(dim=0, keepdim=True).expand_as(z)
    assert torch.allclose(enc, want, atol=1e-9)


def test_attention_matches_softmax_oracle():
    torch.manual_seed(5)
    att = WindowAttention(4).double()
    z = rand((4, 3, 8), 11)
    with torch.no_grad():
        enc = att.encode(z).numpy()
    wq = att.w_q.weight.detach().numpy()
    wk = att.w_k.weight.detach().numpy()
    for n in range(3):
        want = attention_oracle(z[:, n].numpy(), wq, wk, d_model=4)
        assert np.allclose(enc[:, n], want, atol=1e-6)


def test_attention_weights_rows_sum_to_one():
    torch.manual_seed(6)
    att = WindowAttention(3).double()
    z = rand((4, 2, 6), 12)
    q = att.w_q(z)
    k = att.w_k(z)
    logits = torch.einsum("tnd,snd->nts", q, k) / math.sqrt(3.0)
    weights = torch.softmax(logits, dim=2)
    sums = weights.sum(dim=2)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6)


def test_attention_forward_projects_final_position():
    torch.manual_seed(7)
    att = WindowAttention(4).double()
    z = rand((3, 2, 8), 13)
    with torch.no_grad():
        got = att(z)
        want = att.out(att.encode(z)[-1])
    assert torch.allclose(got, want, atol=1e-12)
    assert got.shape == (2, 4)


def test_attention_empty_sequence_rejected():
    att = WindowAttention(4)
    with pytest.raises(RangeError):
        att.encode(torch.zeros(0, 2, 8))
