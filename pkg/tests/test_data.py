import json

import numpy as np
import pytest

from grnorder.data import (
    HEAD_CUES,
    TAIL_CUES,
    EmbeddingTable,
    Paragraph,
    Sentence,
    Token,
    Vocabulary,
    annotate_heuristic,
    dumps_dataset,
    generate_synthetic,
    load_dataset,
    load_embeddings,
    paragraph_from_record,
    paragraph_to_record,
    write_dataset,
)
from grnorder.errors import ConfigurationError, ContractError, DataError, DataWarning
from grnorder.graph import build_graph


def test_record_round_trip(match_day):
    assert paragraph_from_record(paragraph_to_record(match_day)) == match_day


def test_dataset_file_round_trip(tmp_path, corpus):
    path = tmp_path / "c.jsonl"
    write_dataset(corpus, path)
    assert load_dataset(path) == corpus
    assert dumps_dataset(corpus).count("\n") == len(corpus)


def test_malformed_lines_are_skipped_with_warning(tmp_path, match_day):
    good = json.dumps(paragraph_to_record(match_day))
    bad_role = json.dumps({"id": "b", "sentences": [[{"w": "x", "n": True, "r": "Q"}]]})
    path = tmp_path / "d.jsonl"
    path.write_text("\n".join([good, "{not json", bad_role, json.dumps({"id": "e", "sentences": []}), ""]))
    with pytest.warns(DataWarning, match="malformed"):
        out = load_dataset(path)
    assert out == [match_day]


def test_noun_without_role_defaults_to_x():
    with pytest.warns(DataWarning):
        p = paragraph_from_record({"id": "a", "sentences": [[{"w": "Dog", "n": True}]]})
    assert p.sentences[0].tokens[0] == Token("dog", True, "X")


def test_missing_dataset_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "missing.jsonl")
    with pytest.raises(ConfigurationError):
        load_dataset(tmp_path / "missing.jsonl", format="csv")


def test_invalid_records():
    with pytest.raises(DataError):
        paragraph_from_record({"sentences": [[{"w": "a", "r": "S"}]]})
    with pytest.raises(DataError):
        paragraph_from_record({"sentences": [[{"w": "a"}]], "split": "dev"})
    with pytest.raises(DataError):
        paragraph_from_record([1, 2])


def test_token_and_paragraph_contracts():
    with pytest.raises(ContractError):
        Token("run", False, "S")
    with pytest.raises(ContractError):
        Sentence(())
    with pytest.raises(ContractError):
        Paragraph("p", ())


def test_permuted_places_sentence_order_k_in_slot_k(match_day):
    shuffled = match_day.permuted([2, 0, 3, 1])
    assert shuffled.sentences[0] == match_day.sentences[2]
    assert shuffled.sentences[3] == match_day.sentences[1]


def test_embedding_loading(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("cat 1 2 3\ndog 4 5 6\nbad 1 2\nworse a b c\n")
    with pytest.warns(DataWarning):
        table = load_embeddings(path, dimension=3)
    assert "cat" in table and "bad" not in table and "worse" not in table
    np.testing.assert_array_equal(table["dog"], [4, 5, 6])
    np.testing.assert_array_equal(table["zebra"], table.unknown)


def test_embedding_dimension_mismatch_is_a_config_error(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("cat 1 2 3\n")
    with pytest.raises(ConfigurationError):
        load_embeddings(path, dimension=100)
    with pytest.raises(DataError):
        load_embeddings(tmp_path / "none.txt")
    with pytest.raises(ConfigurationError):
        EmbeddingTable(2, {"a": np.zeros(3)})


def test_vocabulary_orders_by_frequency_and_reserves_ids(match_day):
    vocab = Vocabulary.build([match_day])
    assert vocab.itos[:2] == ["<pad>", "<unk>"]
    assert vocab.itos[2] == "the"
    assert vocab.id("never-seen") == 1
    rare = Vocabulary.build([match_day], min_freq=2)
    assert "loudly" not in rare and "dad" in rare


def test_annotate_heuristic():
    s = annotate_heuristic(["The", "Dog", "barked"], {"dog"})
    assert [t.is_noun for t in s.tokens] == [False, True, False]
    assert s.tokens[1].role == "X"
    with pytest.raises(ContractError):
        annotate_heuristic(["a"], set())


def test_synthetic_is_deterministic():
    assert generate_synthetic(3, 10) == generate_synthetic(3, 10)
    assert generate_synthetic(3, 10) != generate_synthetic(4, 10)


@pytest.mark.parametrize("function_words", [True, False])
def test_synthetic_gold_order_is_an_entity_chain(function_words):
    for p in generate_synthetic(11, 40, sentences_range=(3, 6), entities_range=(5, 8), function_words=function_words):
        g = build_graph(p, "SE")
        assert 3 <= len(p) <= 6
        for i in range(len(p) - 1):
            assert (i, i + 1) in g.ss_edges
        assert p.sentences[0].words[0] in HEAD_CUES
        assert p.sentences[-1].words[0] in TAIL_CUES


def test_synthetic_splits_and_ranges():
    ps = generate_synthetic(0, 20, split_fractions=(0.5, 0.25, 0.25))
    assert [sum(p.split == s for p in ps) for s in ("train", "valid", "test")] == [10, 5, 5]
    with pytest.raises(ConfigurationError):
        generate_synthetic(0, 5, sentences_range=(1, 3))
    with pytest.raises(ConfigurationError):
        generate_synthetic(0, 5, sentences_range=(3, 6), entities_range=(1, 2))
    with pytest.raises(ConfigurationError):
        generate_synthetic(0, 5, split_fractions=(0.5, 0.2, 0.2))


def test_synthetic_without_cues_has_no_cue_words():
    for p in generate_synthetic(2, 10, cue_prob=0.0):
        assert p.sentences[0].words[0] not in HEAD_CUES
        assert p.sentences[-1].words[0] not in TAIL_CUES


def test_record_fields_map_directly():
    rec = {"id": "p", "sentences": [[{"w": "dad", "n": True, "r": "S"}]] * 4}
    p = paragraph_from_record(rec)
    assert len(p) == 4
    assert p.sentences[0].tokens[0] == Token("dad", True, "S")


def test_large_corpus_serialisation_is_stable(tmp_path):
    corpus = generate_synthetic(7, 200)
    path = tmp_path / "c.jsonl"
    write_dataset(corpus, path)
    text = path.read_text()
    write_dataset(load_dataset(path), path)
    assert path.read_text() == text


def test_hundred_dimensional_line(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("dog " + " ".join(["0.1"] * 100) + "\n")
    assert load_embeddings(path)["dog"].shape == (100,)


def test_heuristic_annotation_edge_cases():
    assert not any(t.is_noun for t in annotate_heuristic(["my", "dad"], {"cat"}).tokens)
    assert all(t.role == "X" for t in annotate_heuristic(["cat", "dog"], {"cat", "dog"}).tokens)


def test_synthetic_size_controls():
    assert all(len(p) == 4 for p in generate_synthetic(0, 30, sentences_range=(4, 4)))
    corpus = generate_synthetic(1, 1000, entities_range=(4, 8))
    mean_entities = np.mean([build_graph(p).num_entities for p in corpus])
    assert 4 <= mean_entities <= 8
