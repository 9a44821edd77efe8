"""Model components: projections, encoders, fusion, dropout, checkpoints."""

import numpy as np
import pytest

from viml.model import (
    ModelConfig,
    NullTextFeature,
    TriModalExample,
    ViMLModel,
    text_dropout,
)
from viml.model.fusion import AdditionFusion, LinearFusion, make_fusion
from viml.model.layers import (
    FeedForward,
    MultiHeadSelfAttention,
    TransformerBlock,
    gelu,
    softmax_last,
)

from conftest import gradcheck_batch, gradcheck_config, tiny_model_config


class TestProject:
    def test_identity_weights_identity_output(self):
        cfg = tiny_model_config(video_base_dim=32, embed_dim=32)
        model = ViMLModel(cfg, seed=0)
        model.video.proj.W[...] = np.eye(32)
        model.video.proj.b[...] = 0.0
        x = np.random.default_rng(0).normal(size=(5, 32))
        np.testing.assert_allclose(model.project(x, "video"), x)

    def test_zero_input_zero_bias(self):
        cfg = tiny_model_config()
        model = ViMLModel(cfg, seed=0)
        model.music.proj.b[...] = 0.0
        out = model.project(np.zeros((3, cfg.music_base_dim)), "music")
        np.testing.assert_allclose(out, 0.0)

    def test_matches_triple_loop_matmul_oracle(self):
        cfg = tiny_model_config(embed_dim=8, heads=1, text_base_dim=5)
        model = ViMLModel(cfg, seed=2)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 5))
        out = model.project(x, "text")
        W, b = model.text.proj.W, model.text.proj.b
        expected = np.zeros((4, 8))
        for i in range(4):
            for j in range(8):
                acc = b[j]
                for k in range(5):
                    acc += x[i, k] * W[k, j]
                expected[i, j] = acc
        np.testing.assert_allclose(out, expected, atol=1e-6)

    def test_dimension_mismatch_rejected(self):
        model = ViMLModel(tiny_model_config(), seed=0)
        with pytest.raises(ValueError, match="base dim|expected"):
            model.project(np.zeros((2, 999)), "video")


class TestEncode:
    def test_single_token_pooling_is_identity(self):
        # mean pooling and first-token pooling agree on one-token sequences
        cfg_mean = tiny_model_config(pooling="mean")
        cfg_first = tiny_model_config(pooling="first")
        m_mean = ViMLModel(cfg_mean, seed=9)
        m_first = ViMLModel(cfg_first, seed=9)
        x = np.random.default_rng(1).normal(size=(1, cfg_mean.embed_dim))
        e1 = m_mean.encode(x, "music")
        e2 = m_first.encode(x, "music")
        np.testing.assert_allclose(e1.vector, e2.vector)
        assert e1.role == "music"

    def test_permutation_invariant_without_positions(self):
        cfg = tiny_model_config()
        model = ViMLModel(cfg, seed=4)
        model.music.encoder.pos[...] = 0.0
        rng = np.random.default_rng(5)
        x = rng.normal(size=(6, cfg.embed_dim))
        base = model.encode(x, "music").vector
        shuffled = model.encode(x[rng.permutation(6)], "music").vector
        np.testing.assert_allclose(base, shuffled, atol=1e-10)

    def test_block_matches_hand_rolled_reference(self):
        """One pre-norm block vs a from-first-principles recomputation."""
        rng = np.random.default_rng(6)
        block = TransformerBlock("blk", dim=8, heads=1, ff_dim=16, rng=rng, w_scale=0.3)
        x = np.random.default_rng(7).normal(size=(1, 3, 8))
        out, _ = block.forward(x)

        def ref_ln(v, gamma, beta):
            mu = v.mean()
            var = ((v - mu) ** 2).mean()
            return gamma * (v - mu) / np.sqrt(var + 1e-5) + beta

        attn: MultiHeadSelfAttention = block.attn
        ffn: FeedForward = block.ffn
        h = x[0]
        normed = np.stack([ref_ln(h[t], block.ln1.gamma, block.ln1.beta) for t in range(3)])
        q = normed @ attn.wq.W + attn.wq.b
        k = normed @ attn.wk.W + attn.wk.b
        v = normed @ attn.wv.W + attn.wv.b
        scores = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                scores[i, j] = (q[i] @ k[j]) / np.sqrt(8.0)
        weights = np.zeros_like(scores)
        for i in range(3):
            e = np.exp(scores[i] - scores[i].max())
            weights[i] = e / e.sum()
        ctx = weights @ v
        attn_out = ctx @ attn.wo.W + attn.wo.b
        mid = h + attn_out
        normed2 = np.stack(
            [ref_ln(mid[t], block.ln2.gamma, block.ln2.beta) for t in range(3)]
        )
        hidden = gelu(normed2 @ ffn.lin1.W + ffn.lin1.b)
        expected = mid + hidden @ ffn.lin2.W + ffn.lin2.b
        np.testing.assert_allclose(out[0], expected, atol=1e-10)

    def test_sequence_longer_than_positions_rejected(self):
        cfg = tiny_model_config(max_positions=4)
        model = ViMLModel(cfg, seed=0)
        with pytest.raises(ValueError, match="max_positions"):
            model.encode(np.zeros((5, cfg.embed_dim)), "video")


class TestFusion:
    def test_addition_zero_text_identity(self):
        fusion = AdditionFusion("fusion")
        yv = np.random.default_rng(0).normal(size=(4, 16))
        out, _ = fusion.forward(yv, np.zeros_like(yv))
        np.testing.assert_array_equal(out, yv)

    def test_addition_has_zero_parameters(self):
        assert AdditionFusion("fusion").parameter_count() == 0

    def test_linear_parameter_count_131k(self):
        cfg = ModelConfig(embed_dim=256, fusion_variant="linear")
        fusion = LinearFusion("fusion", cfg, np.random.default_rng(0))
        assert fusion.parameter_count() == 2 * 256 * 256 + 256 == 131328

    @pytest.mark.parametrize(
        "variant", ["addition", "linear", "mlp", "transformer1", "transformer2"]
    )
    def test_all_variants_preserve_shape(self, variant):
        cfg = tiny_model_config(fusion_variant=variant)
        fusion = make_fusion(cfg, np.random.default_rng(1))
        yv = np.random.default_rng(2).normal(size=(3, cfg.embed_dim))
        yt = np.random.default_rng(3).normal(size=(3, cfg.embed_dim))
        out, _ = fusion.forward(yv, yt)
        assert out.shape == (3, cfg.embed_dim)
        assert np.all(np.isfinite(out))

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError, match="fusion variant"):
            ModelConfig(fusion_variant="bilinear")


class TestTextDropout:
    def _null(self, dim=7):
        return NullTextFeature(np.full(dim, 9.0), source="zeros")

    def test_p_zero_never_drops(self):
        x = np.random.default_rng(0).normal(size=(50, 1, 7))
        out, mask = text_dropout(x, 0.0, self._null(), np.random.default_rng(1))
        np.testing.assert_array_equal(out, x)
        assert not mask.any()

    def test_p_one_always_drops(self):
        x = np.random.default_rng(0).normal(size=(50, 1, 7))
        out, mask = text_dropout(x, 1.0, self._null(), np.random.default_rng(1))
        assert mask.all()
        np.testing.assert_array_equal(out[:, 0, :], np.full((50, 7), 9.0))

    def test_p_point_eight_rate_in_binomial_band(self):
        # 99% binomial interval for p=0.8 over 10k draws is within +-0.0103
        x = np.zeros((10000, 1, 4))
        _, mask = text_dropout(x, 0.8, self._null(4), np.random.default_rng(123))
        assert 0.78 <= mask.mean() <= 0.82

    def test_independent_per_example(self):
        x = np.zeros((10000, 1, 4))
        _, mask = text_dropout(x, 0.5, self._null(4), np.random.default_rng(7))
        flips = np.sum(mask[1:] != mask[:-1])
        assert 4700 < flips < 5300  # ~half under independence


class TestForwardModes:
    def _model_and_batch(self, **cfg_over):
        cfg = tiny_model_config(**cfg_over)
        model = ViMLModel(cfg, seed=3)
        rng = np.random.default_rng(4)
        video = rng.normal(size=(5, 3, cfg.video_base_dim))
        music = rng.normal(size=(5, 2, cfg.music_base_dim))
        text = rng.normal(size=(5, 1, cfg.text_base_dim))
        return model, video, music, text

    def test_eval_no_text_ignores_text_inputs(self):
        model, video, music, text = self._model_and_batch()
        fp1 = model.forward(video, music, text, mode="eval_no_text")
        fp2 = model.forward(video, music, -5.0 * text + 1.0, mode="eval_no_text")
        np.testing.assert_array_equal(fp1.y_vt, fp2.y_vt)

    def test_train_without_dropout_equals_eval(self):
        model, video, music, text = self._model_and_batch(text_dropout_p=0.0)
        fp_train = model.forward(
            video, music, text, mode="train", rng=np.random.default_rng(0)
        )
        fp_eval = model.forward(video, music, text, mode="eval_with_text")
        np.testing.assert_array_equal(fp_train.y_vt, fp_eval.y_vt)
        np.testing.assert_array_equal(fp_train.y_m, fp_eval.y_m)

    def test_music_text_model_fused_equals_text_branch(self):
        model, _, music, text = self._model_and_batch(use_video=False)
        fp = model.forward(None, music, text, mode="eval_with_text")
        np.testing.assert_array_equal(fp.y_vt, fp.y_t)

    def test_missing_video_rejected(self):
        model, _, music, text = self._model_and_batch()
        with pytest.raises(ValueError, match="missing modality"):
            model.forward(None, music, text, mode="eval_with_text")

    def test_forward_deterministic(self):
        model, video, music, text = self._model_and_batch()
        fp1 = model.forward(video, music, text, mode="eval_with_text")
        fp2 = model.forward(video, music, text, mode="eval_with_text")
        assert fp1.y_vt.tobytes() == fp2.y_vt.tobytes()


class TestCheckpoint:
    def test_round_trip_preserves_forward(self, tmp_path):
        cfg = gradcheck_config("transformer2")
        model = ViMLModel(cfg, seed=13)
        video, music, text = gradcheck_batch(0)
        before = model.forward(video, music, text)
        model.save(tmp_path / "ckpt")
        loaded = ViMLModel.load(tmp_path / "ckpt")
        after = loaded.forward(video, music, text)
        # float32 serialization rounds the weights; outputs stay very close
        np.testing.assert_allclose(after.y_vt, before.y_vt, rtol=1e-4, atol=1e-5)
        assert loaded.parameter_count() == model.parameter_count()

    def test_shape_validation_on_load(self, tmp_path):
        cfg = gradcheck_config("linear")
        model = ViMLModel(cfg, seed=1)
        model.save(tmp_path / "ckpt")
        bad = tmp_path / "ckpt" / "music.proj.W.bin"
        bad.write_bytes(bad.read_bytes()[:-4])
        with pytest.raises(ValueError, match="config implies"):
            ViMLModel.load(tmp_path / "ckpt")

    def test_missing_tensor_file(self, tmp_path):
        cfg = gradcheck_config("linear")
        ViMLModel(cfg, seed=1).save(tmp_path / "ckpt")
        (tmp_path / "ckpt" / "text.proj.W.bin").unlink()
        with pytest.raises(FileNotFoundError, match="missing tensor"):
            ViMLModel.load(tmp_path / "ckpt")

    def test_same_seed_same_fingerprint(self):
        cfg = gradcheck_config("mlp")
        assert ViMLModel(cfg, seed=2).fingerprint() == ViMLModel(cfg, seed=2).fingerprint()
        assert ViMLModel(cfg, seed=2).fingerprint() != ViMLModel(cfg, seed=3).fingerprint()


def test_softmax_rows_sum_to_one():
    x = np.random.default_rng(0).normal(size=(2, 3, 4, 5)) * 30
    s = softmax_last(x)
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(s >= 0)


class TestForwardExamples:
    def _examples(self, cfg, rng, text):
        return [
            TriModalExample(
                track_id=f"t{i}",
                music=rng.normal(size=(2, cfg.music_base_dim)),
                video=rng.normal(size=(3, cfg.video_base_dim)),
                text=text(i),
            )
            for i in range(4)
        ]

    def test_feature_rows_match_raw_forward(self):
        cfg = tiny_model_config()
        model = ViMLModel(cfg, seed=1)
        rng = np.random.default_rng(0)
        rows = np.random.default_rng(1).normal(size=(4, 1, cfg.text_base_dim))
        examples = self._examples(cfg, rng, lambda i: rows[i])
        fp = model.forward_examples(examples)
        video = np.stack([e.video for e in examples])
        music = np.stack([e.music for e in examples])
        raw = model.forward(video, music, rows, mode="eval_with_text")
        np.testing.assert_array_equal(fp.y_vt, raw.y_vt)

    def test_empty_string_takes_null_path(self):
        from viml.features import HashingTextEncoder

        cfg = tiny_model_config()
        model = ViMLModel(cfg, seed=1)
        rng = np.random.default_rng(2)
        enc = HashingTextEncoder(dim=cfg.text_base_dim)
        examples = self._examples(cfg, rng, lambda i: "" if i % 2 else "happy pop")
        fp = model.forward_examples(examples, text_encoder=enc.encode)
        null_examples = [
            TriModalExample(
                track_id=e.track_id, music=e.music, video=e.video, text=None
            )
            for e in examples
        ]
        fp_null = model.forward_examples(null_examples)
        np.testing.assert_array_equal(fp.y_vt[1], fp_null.y_vt[1])
        assert not np.array_equal(fp.y_vt[0], fp_null.y_vt[0])

    def test_string_without_encoder_rejected(self):
        cfg = tiny_model_config()
        model = ViMLModel(cfg, seed=1)
        rng = np.random.default_rng(3)
        examples = self._examples(cfg, rng, lambda i: "some text")
        with pytest.raises(ValueError, match="text_encoder"):
            model.forward_examples(examples)
