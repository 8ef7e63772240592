import pytest
import torch

from conftest import fd_grad, rel_error
from evtalign.encoder import (
    CrossFramePrompts,
    EventEncoder,
    EventEncoderLayer,
    ImageEncoder,
    patch_grid,
)
from evtalign.errors import ConfigError

torch.set_default_dtype(torch.float64)


def micro_encoder(seed=0, **overrides):
    torch.manual_seed(seed)
    kwargs = dict(frame_size=8, patch_size=4, frames=2, dim=8, out_dim=8,
                  layers=2, heads=2, n_prompts=2)
    kwargs.update(overrides)
    return EventEncoder(**kwargs).double()


def micro_frames(seed=0, batch=2, frames=2, size=8):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(batch, frames, size, size, 3, generator=g, dtype=torch.float64)


class TestPatchGrid:
    def test_vit_scale_arithmetic(self):
        assert patch_grid(224, 224, 16) == (196, 768)

    def test_toy_scale_arithmetic(self):
        assert patch_grid(32, 32, 8) == (16, 192)

    def test_indivisible_geometry_rejected(self):
        with pytest.raises(ConfigError):
            patch_grid(30, 30, 8)


class TestPatchifyEmbed:
    def test_output_shape(self):
        enc = micro_encoder()
        tokens = enc.patchify_embed(micro_frames())
        assert tokens.shape == (2, 2, 1 + enc.n_patches, 8)

    def test_geometry_mismatch_rejected(self):
        enc = micro_encoder()
        with pytest.raises(ConfigError):
            enc.patchify_embed(torch.rand(1, 2, 12, 12, 3))


class TestTemporalEncoding:
    def test_zero_encodings_are_identity(self):
        enc = micro_encoder()
        with torch.no_grad():
            enc.spatial_encoding.zero_()
            enc.temporal_encoding.zero_()
        tokens = enc.patchify_embed(micro_frames())
        out = enc.add_temporal_encoding(tokens)
        torch.testing.assert_close(out, tokens)

    def test_frames_differ_by_constant_row_offset(self):
        enc = micro_encoder()
        tokens = torch.zeros(1, 2, 1 + enc.n_patches, 8)
        out = enc.add_temporal_encoding(tokens)
        diff = out[0, 1] - out[0, 0]
        expected = (enc.temporal_encoding[1] - enc.temporal_encoding[0]).expand_as(diff)
        torch.testing.assert_close(diff, expected)

    def test_out_of_range_frame_index(self):
        enc = micro_encoder()
        with pytest.raises(ConfigError):
            enc.add_temporal_encoding(torch.zeros(1, 1 + enc.n_patches, 8), frame_index=5)

    def test_gradient_is_all_ones_broadcast(self):
        # d sum(out) / d temporal_encoding[t] = (1+L) per component
        enc = micro_encoder()
        frames = micro_frames()
        tokens = enc.patchify_embed(frames).detach()

        def probe():
            return enc.add_temporal_encoding(tokens).sum()

        analytic = torch.autograd.grad(probe(), enc.temporal_encoding)[0]
        batch, t_frames = tokens.shape[0], tokens.shape[1]
        expected = torch.full_like(analytic, batch * (1 + enc.n_patches))
        torch.testing.assert_close(analytic, expected)
        numeric = fd_grad(probe, enc.temporal_encoding)
        assert rel_error(analytic, numeric) < 1e-6


class TestCrossFramePrompts:
    def test_single_frame_is_value_projection(self):
        torch.manual_seed(3)
        mod = CrossFramePrompts(8, 2).double()
        x = torch.randn(2, 1, 8)
        out = mod(x)
        # softmax over one key = 1, so attention output is the value path
        normed = mod.ln(x)
        _, _, v = mod.attn.qkv(normed).chunk(3, dim=-1)
        torch.testing.assert_close(out, mod.attn.out(v))

    def test_output_shape_any_frame_count(self):
        mod = CrossFramePrompts(8, 2).double()
        for t in (1, 3, 5):
            assert mod(torch.randn(2, t, 8)).shape == (2, t, 8)

    def test_permutation_equivariance(self):
        torch.manual_seed(4)
        mod = CrossFramePrompts(8, 2).double()
        x = torch.randn(2, 5, 8)
        perm = torch.tensor([3, 0, 4, 1, 2])
        torch.testing.assert_close(mod(x[:, perm]), mod(x)[:, perm])


class TestEncoderLayer:
    def test_prompt_free_layer_is_standard_block(self):
        torch.manual_seed(5)
        layer = EventEncoderLayer(8, 2, n_prompts=0, frames=1).double()
        tokens = torch.randn(2, 1, 5, 8)
        out = layer(tokens, cross_frame=None)
        expected = layer.block(tokens.reshape(2, 5, 8)).reshape(2, 1, 5, 8)
        torch.testing.assert_close(out, expected)

    def test_prompts_are_transient(self):
        torch.manual_seed(6)
        layer = EventEncoderLayer(8, 2, n_prompts=3, frames=2).double()
        tokens = torch.randn(2, 2, 5, 8)
        cross = torch.randn(2, 2, 8)
        out = layer(tokens, cross)
        assert out.shape == tokens.shape

    def test_attention_rows_sum_to_one_over_full_width(self):
        torch.manual_seed(7)
        layer = EventEncoderLayer(8, 2, n_prompts=3, frames=2).double()
        tokens = torch.randn(1, 2, 5, 8)
        cross = torch.randn(1, 2, 8)
        sink = []
        layer(tokens, cross, attn_sink=sink)
        attn = sink[0]
        # full augmented width: CLS + 3 prompts + 4 messages + cross-frame
        assert attn.shape[-1] == 1 + 3 + 4 + 1
        torch.testing.assert_close(attn.sum(-1), torch.ones_like(attn.sum(-1)))


class TestEncodeEvents:
    def test_unit_norm_output(self):
        enc = micro_encoder()
        emb = enc(micro_frames())
        norms = emb.norm(dim=-1)
        torch.testing.assert_close(norms, torch.ones_like(norms), atol=1e-6, rtol=0)

    def test_output_dim_independent_of_frame_count(self):
        for t in (1, 2, 4):
            enc = micro_encoder(frames=t)
            emb = enc(micro_frames(frames=t))
            assert emb.shape == (2, 8)

    def test_identical_frames_zero_temporal_gives_identical_cls(self):
        enc = micro_encoder()
        with torch.no_grad():
            enc.temporal_encoding.zero_()
        one = micro_frames(batch=1, frames=1)[:, :1]
        frames = one.expand(1, 2, 8, 8, 3)
        tokens = enc.add_temporal_encoding(enc.patchify_embed(frames))
        for s, layer in enumerate(enc.layers):
            x_cf = enc.cross_frame_prompts(tokens[:, :, 0, :], s)
            tokens = layer(tokens, x_cf)
        cls = (tokens[:, :, 0, :] @ enc.cls_projection).detach()
        variance = cls.var(dim=1, unbiased=False).max()
        assert float(variance) < 1e-6

    def test_deterministic_given_seed(self):
        a = micro_encoder(seed=11)(micro_frames(seed=2))
        b = micro_encoder(seed=11)(micro_frames(seed=2))
        torch.testing.assert_close(a, b, atol=0, rtol=0)

    def test_temporal_modeling_off_runs(self):
        enc = micro_encoder(temporal_modeling=False)
        emb = enc(micro_frames())
        assert emb.shape == (2, 8)

    def test_gradients_match_finite_differences(self):
        enc = micro_encoder(seed=13, layers=1)
        frames = micro_frames(seed=3)

        def probe():
            return enc(frames).sum()

        for param in (enc.temporal_encoding, enc.layers[0].prompts):
            analytic = torch.autograd.grad(probe(), param, retain_graph=False)[0]
            numeric = fd_grad(probe, param)
            assert rel_error(analytic, numeric) < 1e-4


class TestImageEncoder:
    def test_unit_norm_and_shape(self):
        torch.manual_seed(1)
        enc = ImageEncoder(image_size=8, patch_size=4, dim=8, out_dim=8,
                           layers=2, heads=2).double()
        images = torch.rand(3, 8, 8, 3)
        emb = enc(images)
        assert emb.shape == (3, 8)
        norms = emb.norm(dim=-1)
        torch.testing.assert_close(norms, torch.ones_like(norms), atol=1e-6, rtol=0)

    def test_identical_inputs_identical_embeddings(self):
        torch.manual_seed(2)
        enc = ImageEncoder(image_size=8, patch_size=4, dim=8, out_dim=8,
                           layers=1, heads=2).double()
        img = torch.rand(1, 8, 8, 3)
        torch.testing.assert_close(enc(img), enc(img.clone()), atol=0, rtol=0)

    def test_geometry_mismatch_rejected(self):
        enc = ImageEncoder(image_size=8, patch_size=4, dim=8, out_dim=8,
                           layers=1, heads=2)
        with pytest.raises(ConfigError):
            enc(torch.rand(1, 12, 12, 3))
