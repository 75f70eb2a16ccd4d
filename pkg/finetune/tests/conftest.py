import pytest

from finetune.model import base_state_dict, save_checkpoint

from ft_fixtures import make_corpus_records, make_triplet_records, write_jsonl


@pytest.fixture
def triplets_file(tmp_path):
    return write_jsonl(tmp_path / "triplets.jsonl", make_triplet_records())


@pytest.fixture
def corpus_file(tmp_path):
    return write_jsonl(tmp_path / "corpus.jsonl", make_corpus_records())


@pytest.fixture
def base_ckpt(tmp_path):
    return save_checkpoint(
        tmp_path / "base",
        base_model="trigram-small",
        state_dict=base_state_dict("trigram-small"),
    )
