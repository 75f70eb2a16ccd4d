import json

import numpy as np
import pytest
import torch

from finetune.config import FinetuneConfig
from finetune.data import DataFormatError
from finetune.model import base_state_dict, load_checkpoint
from finetune.train import LOSS_NOTE, train

from ft_fixtures import make_triplet_records, write_jsonl


def read_log(path):
    """Parse training_log.csv into (comment, header, rows)."""
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = []
    for line in lines[2:]:
        step, epoch, loss = line.split(",")
        rows.append((int(step), int(epoch), float(loss)))
    return lines[0], lines[1], rows


class TestTrain:
    def test_artifacts_and_log_shape(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=2)
        result = train(triplets_file, cfg)
        assert result.checkpoint_dir.is_dir()
        assert result.base_dir.is_dir()
        comment, header, rows = read_log(result.log_path)
        assert comment == f"# loss: {LOSS_NOTE}"
        assert "explicit negative" in comment
        assert header == "step,epoch,loss"
        # 64 triplets at batch 18 is 4 steps per epoch
        assert [r[0] for r in rows] == list(range(1, 9))
        assert [r[1] for r in rows] == [1] * 4 + [2] * 4
        assert result.steps == 8

    def test_epoch_means_decrease_on_fixture(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=3)
        result = train(triplets_file, cfg)
        means = result.epoch_means
        assert len(means) == 3
        assert all(later < earlier for earlier, later in zip(means, means[1:]))

    def test_final_step_loss_below_first(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=1)
        result = train(triplets_file, cfg)
        _, _, rows = read_log(result.log_path)
        assert rows[-1][2] < rows[0][2]

    def test_epoch_means_match_log(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=2)
        result = train(triplets_file, cfg)
        _, _, rows = read_log(result.log_path)
        for epoch in (1, 2):
            logged = [loss for _, ep, loss in rows if ep == epoch]
            assert np.mean(logged) == pytest.approx(result.epoch_means[epoch - 1], abs=1e-6)

    def test_deterministic_for_fixed_config(self, tmp_path, triplets_file):
        cfg_a = FinetuneConfig(output_dir=tmp_path / "a", epochs=2)
        cfg_b = FinetuneConfig(output_dir=tmp_path / "b", epochs=2)
        log_a = train(triplets_file, cfg_a).log_path
        log_b = train(triplets_file, cfg_b).log_path
        assert log_a.read_bytes() == log_b.read_bytes()

    def test_seed_changes_the_run(self, tmp_path, triplets_file):
        means_a = train(
            triplets_file, FinetuneConfig(output_dir=tmp_path / "a", epochs=1, seed=0)
        ).epoch_means
        means_b = train(
            triplets_file, FinetuneConfig(output_dir=tmp_path / "b", epochs=1, seed=1)
        ).epoch_means
        assert means_a != means_b

    def test_base_checkpoint_untouched_by_training(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=1)
        result = train(triplets_file, cfg)
        _, saved = load_checkpoint(result.base_dir)
        pristine = base_state_dict("trigram-small")
        assert torch.equal(saved["proj.weight"], pristine["proj.weight"])
        assert torch.equal(saved["proj.bias"], pristine["proj.bias"])

    def test_training_moves_the_weights(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=1)
        result = train(triplets_file, cfg)
        _, tuned = load_checkpoint(result.checkpoint_dir)
        _, base = load_checkpoint(result.base_dir)
        assert not torch.equal(tuned["proj.weight"], base["proj.weight"])

    def test_checkpoint_records_run_shape(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=2)
        result = train(triplets_file, cfg)
        config, _ = load_checkpoint(result.checkpoint_dir)
        assert config["epochs"] == 2
        assert config["steps"] == 8

    def test_fp32_precision_also_trains(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=1, precision="fp32")
        result = train(triplets_file, cfg)
        assert result.steps == 4

    def test_batch_larger_than_set_is_one_step(self, tmp_path, triplets_file):
        cfg = FinetuneConfig(output_dir=tmp_path / "out", epochs=1, batch_size=500)
        result = train(triplets_file, cfg)
        assert result.steps == 1


class TestTrainValidation:
    def test_schema_violation_fails_before_any_output(self, tmp_path):
        records = make_triplet_records(n=4)
        path = tmp_path / "triplets.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(records[0]) + "\n")
            fh.write('{"anchor": "a text", "positive": "p text"}\n')
        out = tmp_path / "out"
        with pytest.raises(DataFormatError, match=r"triplets\.jsonl:2.*negative"):
            train(path, FinetuneConfig(output_dir=out))
        assert not out.exists()

    def test_empty_triplets_file_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "triplets.jsonl", [])
        with pytest.raises(DataFormatError, match="no triplets"):
            train(path, FinetuneConfig(output_dir=tmp_path / "out"))

    def test_missing_triplets_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            train(tmp_path / "absent.jsonl", FinetuneConfig(output_dir=tmp_path / "out"))
