"""Token template, split laws, and the episode dump round trip."""

import json

import numpy as np
import pytest

from coqe.models.arithmetic import (
    N_ANSWERS,
    N_CONDITIONS,
    QUERY_LAST_POS,
    QUESTION_POS,
    READOUT_POS,
    SEQ_LEN,
    VOCAB,
    build_tokens,
    encode_operand,
)
from coqe.tasks import episode_records, gen_arithmetic, write_records

REV = {v: k for k, v in VOCAB.items()}


def decode_int(ids):
    return int("".join(REV[t] for t in ids))


def test_encode_operand_digits_and_letters():
    assert [REV[t] for t in encode_operand(7)] == ["0", "0", "7"]
    assert [REV[t] for t in encode_operand(123)] == ["1", "2", "3"]
    assert [REV[t] for t in encode_operand("g")] == ["_", "_", "g"]
    with pytest.raises(ValueError):
        encode_operand(1000)
    with pytest.raises(ValueError):
        encode_operand("gh")


def test_token_template_layout():
    toks = build_tokens([(3, 7, 10), (20, 30, 50), (1, 2, 3)], (20, 30))
    assert toks.shape == (SEQ_LEN,)
    assert REV[toks[0]] == "[C]"
    assert REV[toks[QUESTION_POS]] == "[Q]"
    assert REV[toks[READOUT_POS]] == "[A]"
    # first condition: a a a + b b b = c c c .
    assert decode_int(toks[1:4]) == 3
    assert REV[toks[4]] == "+"
    assert decode_int(toks[5:8]) == 7
    assert REV[toks[8]] == "="
    assert decode_int(toks[9:12]) == 10
    assert REV[toks[12]] == "."
    # second condition starts right after
    assert decode_int(toks[13:16]) == 20
    # question repeats the queried pair, ending at the fixed query slot
    assert decode_int(toks[QUESTION_POS + 1:QUESTION_POS + 4]) == 20
    assert REV[toks[QUESTION_POS + 4]] == "+"
    assert decode_int(toks[QUESTION_POS + 5:QUERY_LAST_POS + 1]) == 30


def test_build_tokens_validation():
    with pytest.raises(ValueError, match="conditions"):
        build_tokens([(1, 2, 3)], (1, 2))
    with pytest.raises(ValueError, match="out of range"):
        build_tokens([(1, 2, 300), (3, 4, 7), (5, 6, 11)], (1, 2))


def _conditions(toks):
    out = []
    for i in range(N_CONDITIONS):
        base = 1 + 12 * i
        out.append((toks[base:base + 3], toks[base + 4:base + 7],
                    decode_int(toks[base + 8:base + 11])))
    return out


def test_train_split_sums_are_true_and_query_repeats():
    ep = gen_arithmetic("train", count=50, seed=3)
    assert ep["tokens"].shape == (50, SEQ_LEN)
    for i in range(50):
        toks = ep["tokens"][i]
        conds = _conditions(toks)
        seen = set()
        for a_ids, b_ids, c in conds:
            a, b = decode_int(a_ids), decode_int(b_ids)
            assert a + b == c
            assert (a, b) not in seen
            seen.add((a, b))
        qa = toks[QUESTION_POS + 1:QUESTION_POS + 4]
        qb = toks[QUESTION_POS + 5:QUERY_LAST_POS + 1]
        assert decode_int(qa) + decode_int(qb) == ep["answers"][i]
        assert any(
            np.array_equal(qa, ai) and np.array_equal(qb, bi)
            for ai, bi, _ in conds
        )
        np.testing.assert_array_equal(
            ep["results"][i], [c for _, _, c in conds]
        )
        assert VOCAB["_"] not in toks


def test_icl_split_has_one_letter_fact_and_fresh_sum():
    ep = gen_arithmetic("icl-eval", count=50, seed=4)
    underscore = VOCAB["_"]
    for i in range(50):
        toks = ep["tokens"][i]
        conds = _conditions(toks)
        letter_rows = [
            (a, b, c) for a, b, c in conds
            if a[0] == underscore or b[0] == underscore
        ]
        assert len(letter_rows) == 1
        la, lb, made_up = letter_rows[0]
        assert la[0] == la[1] == underscore and lb[0] == lb[1] == underscore
        assert made_up == ep["answers"][i]
        numeric_sums = {
            c for a, b, c in conds if a[0] != underscore
        }
        assert made_up not in numeric_sums
        for a_ids, b_ids, c in conds:
            if a_ids[0] != underscore:
                assert decode_int(a_ids) + decode_int(b_ids) == c
        # the question asks about the letter pair
        qa = toks[QUESTION_POS + 1:QUESTION_POS + 4]
        qb = toks[QUESTION_POS + 5:QUERY_LAST_POS + 1]
        np.testing.assert_array_equal(qa, la)
        np.testing.assert_array_equal(qb, lb)


def test_answers_in_range():
    for split in ("train", "icl-eval"):
        ep = gen_arithmetic(split, count=200, seed=5)
        assert ep["answers"].min() >= 0
        assert ep["answers"].max() < N_ANSWERS


def test_episodes_reproducible_bitwise():
    a = gen_arithmetic("train", count=20, seed=6, step=2)
    b = gen_arithmetic("train", count=20, seed=6, step=2)
    np.testing.assert_array_equal(a["tokens"], b["tokens"])
    np.testing.assert_array_equal(a["answers"], b["answers"])
    c = gen_arithmetic("train", count=20, seed=6, step=3)
    assert not np.array_equal(a["tokens"], c["tokens"])


def test_unknown_split_rejected():
    with pytest.raises(ValueError, match="unknown split"):
        gen_arithmetic("ood", count=1, seed=0)


# -- episode dump ---------------------------------------------------------------


def test_episode_records_slice_batches():
    ep = gen_arithmetic("train", count=4, seed=7)
    records = episode_records(ep)
    assert len(records) == 4
    for i, rec in enumerate(records):
        assert rec["index"] == i
        assert rec["split"] == "train"
        assert rec["seed"] == 7
        np.testing.assert_array_equal(rec["tokens"], ep["tokens"][i])
        assert isinstance(rec["tokens"], list)


def test_episode_records_reject_ragged_batches():
    with pytest.raises(ValueError, match="batch size"):
        episode_records({"a": np.zeros((3, 2)), "b": np.zeros((4, 2))})
    with pytest.raises(ValueError, match="no array fields"):
        episode_records({"kind": "train"})


def test_write_records_round_trip(tmp_path):
    ep = gen_arithmetic("icl-eval", count=5, seed=8)
    path = tmp_path / "episodes.ndjson"
    n = write_records(path, episode_records(ep))
    assert n == 5
    lines = path.read_text().splitlines()
    assert len(lines) == 5
    back = [json.loads(line) for line in lines]
    for i, rec in enumerate(back):
        assert rec["index"] == i
        np.testing.assert_array_equal(rec["tokens"], ep["tokens"][i])
    # key-sorted compact form is byte-stable across rewrites
    again = tmp_path / "again.ndjson"
    write_records(again, episode_records(ep))
    assert again.read_bytes() == path.read_bytes()
