import json
from pathlib import Path

import pytest
import torch

from vsl_nn.harness import (TRAINABLE_PARAMETERS, HarnessConfig,
                            HarnessError, ManifestError,
                            PretrainedWeightsError, backbone_fingerprint,
                            build_model, evaluate_to_responses, read_manifest,
                            train_eval, train_head, trainable_parameter_count,
                            write_responses)


def _config(manifest, **overrides) -> HarnessConfig:
    defaults = dict(manifest=manifest, pretrained=False, epochs=1,
                    minibatch=16, seed=11)
    defaults.update(overrides)
    return HarnessConfig(**defaults)


class TestBuildModel:
    def test_trainable_parameter_audit(self, mini_dataset):
        manifest, _ = mini_dataset
        model = build_model(_config(manifest))
        assert trainable_parameter_count(model) == TRAINABLE_PARAMETERS == 8194

    def test_forward_shape(self, mini_dataset):
        manifest, _ = mini_dataset
        model = build_model(_config(manifest))
        with torch.no_grad():
            logits = model(torch.zeros(1, 3, 227, 227))
        assert tuple(logits.shape) == (1, 2)

    def test_backbone_flagged_non_trainable(self, mini_dataset):
        manifest, _ = mini_dataset
        model = build_model(_config(manifest))
        for name, param in model.named_parameters():
            assert param.requires_grad == name.startswith("classifier.6.")

    def test_missing_pretrained_weights_explicit_failure(self, mini_dataset):
        manifest, _ = mini_dataset
        cache = Path(torch.hub.get_dir()) / "checkpoints" / "alexnet-owt-7be5be79.pth"
        if cache.is_file():
            pytest.skip("pretrained weights are cached on this machine")
        with pytest.raises(PretrainedWeightsError, match="download.pytorch.org"):
            build_model(_config(manifest, pretrained=True))

    def test_missing_weights_file_names_path(self, mini_dataset, tmp_path):
        manifest, _ = mini_dataset
        missing = tmp_path / "nope.pth"
        with pytest.raises(PretrainedWeightsError, match="nope.pth"):
            build_model(_config(manifest, pretrained=True, weights_path=missing))


class TestFrozenBackbone:
    def test_fingerprint_unchanged_by_training(self, mini_dataset):
        manifest, _ = mini_dataset
        config = _config(manifest)
        rows = read_manifest(manifest)
        model = build_model(config)
        before = backbone_fingerprint(model)
        head_before = [p.detach().clone() for p in model.classifier[6].parameters()]
        train_head(model, config, rows)
        assert backbone_fingerprint(model) == before
        moved = any(not torch.equal(a, b.detach()) for a, b in
                    zip(head_before, model.classifier[6].parameters()))
        assert moved, "head parameters never moved"

    def test_paper_freeze_trick_equivalent(self, mini_dataset):
        # 1e-20 updates vanish below float32 resolution, so the trick mode
        # leaves the backbone bitwise intact too
        manifest, _ = mini_dataset
        config = _config(manifest, paper_freeze_trick=True)
        rows = read_manifest(manifest)
        model = build_model(config)
        assert all(p.requires_grad for p in model.parameters())
        assert trainable_parameter_count(model, config) == 8194
        before = backbone_fingerprint(model)
        train_head(model, config, rows)
        assert backbone_fingerprint(model) == before

    def test_contract_enforced_when_backbone_moves(self, mini_dataset):
        # an effectively large backbone rate in trick mode must be caught
        from vsl_nn.harness import FrozenBackboneError
        manifest, _ = mini_dataset
        config = _config(manifest, paper_freeze_trick=True, base_lr=0.1)
        rows = read_manifest(manifest)
        model = build_model(config)
        with pytest.raises(FrozenBackboneError):
            train_head(model, config, rows)


class TestTraining:
    def test_loss_decreases_on_separable_data(self, mini_dataset, tmp_path):
        manifest, _ = mini_dataset
        config = _config(manifest, epochs=4, head_lr=1e-3)
        rows = read_manifest(manifest)
        model = build_model(config)
        log_path = tmp_path / "log.json"
        log = train_head(model, config, rows, log_path=log_path)
        assert len(log.epoch_losses) == 4
        assert log.epoch_losses[-1] < log.epoch_losses[0]
        assert json.loads(log_path.read_text())["epoch_losses"] == log.epoch_losses

    def test_epochs_zero_near_chance(self, mini_dataset):
        manifest, rows_raw = mini_dataset
        config = _config(manifest, epochs=0)
        rows = read_manifest(manifest)
        model = build_model(config)
        train_head(model, config, rows)
        records = dict(evaluate_to_responses(model, config, rows))
        truth = {r["trial_id"]: r["target_present"] for r in rows_raw
                 if r["split"] == "test"}
        acc = sum((records[tid] == "present") == truth[tid]
                  for tid in truth) / len(truth)
        assert 0.35 <= acc <= 0.65

    def test_decode_failure_names_file(self, tmp_path):
        from conftest import make_dataset
        manifest, rows = make_dataset(tmp_path, n_train_per_side=4,
                                      n_test_per_side=2)
        bad = tmp_path / rows[0]["image_path"]
        bad.write_bytes(b"not a png at all")
        config = _config(manifest, epochs=1, minibatch=4)
        model = build_model(config)
        with pytest.raises(HarnessError, match=bad.name):
            train_head(model, config, read_manifest(manifest))


class TestEvaluate:
    def test_responses_cover_test_rows_in_order(self, mini_dataset):
        manifest, rows_raw = mini_dataset
        config = _config(manifest, epochs=0)
        rows = read_manifest(manifest)
        model = build_model(config)
        records = evaluate_to_responses(model, config, rows)
        test_ids = [r["trial_id"] for r in rows_raw if r["split"] == "test"]
        assert [tid for tid, _ in records] == test_ids
        assert {label for _, label in records} <= {"present", "absent"}

    def test_no_test_rows_aborts(self, tmp_path):
        from conftest import make_dataset
        manifest, _ = make_dataset(tmp_path, n_train_per_side=2,
                                   n_test_per_side=0)
        config = _config(manifest, epochs=0)
        model = build_model(config)
        with pytest.raises(ManifestError, match="test rows"):
            evaluate_to_responses(model, config, read_manifest(manifest))

    def test_response_file_format(self, mini_dataset, tmp_path):
        manifest, _ = mini_dataset
        config = _config(manifest, epochs=0)
        rows = read_manifest(manifest)
        model = build_model(config)
        records = evaluate_to_responses(model, config, rows)
        out = tmp_path / "responses.csv"
        write_responses(records, out)
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "trial_id,response"
        assert len(lines) == 1 + len(records)

    def test_train_eval_deterministic(self, mini_dataset, tmp_path):
        manifest, _ = mini_dataset
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        train_eval(_config(manifest, epochs=2), a)
        train_eval(_config(manifest, epochs=2), b)
        assert a.read_bytes() == b.read_bytes()


class TestManifestParsing:
    def test_missing_field_line_numbered(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"trial_id": "a", "split": "test"}\n')
        with pytest.raises(ManifestError, match=r"m\.jsonl:1.*missing"):
            read_manifest(path)

    def test_duplicate_trial_id(self, tmp_path):
        row = {"trial_id": "a", "split": "test", "task": "luminance",
               "difficulty": 1, "set_size": 1, "target_present": True,
               "image_path": "a.png", "seed": 0}
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
        with pytest.raises(ManifestError, match=r":2.*duplicate"):
            read_manifest(path)

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("")
        with pytest.raises(ManifestError, match="empty"):
            read_manifest(path)
