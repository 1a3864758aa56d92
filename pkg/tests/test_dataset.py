"""Dataset ingestion and synthetic-suite generation tests."""

import json

import pytest

from driftbeam import DatasetError, TaskInstance, load_dataset, save_dataset
from driftbeam.backends.synthetic import SyntheticTask
from driftbeam.dataset import (
    is_synthetic_name,
    synthetic_instance_task,
    synthetic_size,
    synthetic_suite,
)


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


class TestLoadDataset:
    def test_valid_file(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        write_jsonl(path, [
            {"id": "t1", "prompt": "Q1\n", "answer": "4"},
            {"id": "t2", "prompt": "Q2\n", "answer": "B"},
        ])
        instances = load_dataset(path)
        assert [i.id for i in instances] == ["t1", "t2"]
        assert instances[0] == TaskInstance(id="t1", prompt="Q1\n", gold_answer="4")

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        path.write_text('{"id": "t1", "prompt": "Q", "answer": "4"}\n\n\n')
        assert len(load_dataset(path)) == 1

    def test_missing_field_carries_line_number(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        write_jsonl(path, [
            {"id": "t1", "prompt": "Q1\n", "answer": "4"},
            {"id": "t2", "prompt": "Q2\n"},
        ])
        with pytest.raises(DatasetError, match="tasks.jsonl:2.*answer"):
            load_dataset(path)

    def test_invalid_json_carries_line_number(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        path.write_text('{"id": "t1", "prompt": "Q", "answer": "4"}\nnot json\n')
        with pytest.raises(DatasetError, match="tasks.jsonl:2"):
            load_dataset(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        write_jsonl(path, [
            {"id": "t1", "prompt": "Q1\n", "answer": "4"},
            {"id": "t1", "prompt": "Q2\n", "answer": "5"},
        ])
        with pytest.raises(DatasetError, match="duplicate id"):
            load_dataset(path)

    def test_empty_dataset_warns(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        path.write_text("")
        with pytest.warns(UserWarning, match="empty"):
            assert load_dataset(path) == []

    def test_non_string_ids_coerced(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        write_jsonl(path, [{"id": 7, "prompt": "Q", "answer": 4}])
        inst = load_dataset(path)[0]
        assert inst.id == "7" and inst.gold_answer == "4"

    def test_save_load_roundtrip(self, tmp_path):
        instances = [
            TaskInstance(id="a", prompt="P1\n", gold_answer="1"),
            TaskInstance(id="b", prompt="P2\n", gold_answer="2"),
        ]
        path = tmp_path / "rt.jsonl"
        save_dataset(path, instances)
        assert load_dataset(path) == instances


class TestSyntheticNames:
    def test_name_parsing(self):
        assert is_synthetic_name("synthetic:100")
        assert not is_synthetic_name("gsm8k.jsonl")
        assert synthetic_size("synthetic:32") == 32
        assert synthetic_size("synthetic:0") == 0

    def test_bad_sizes(self):
        with pytest.raises(DatasetError):
            synthetic_size("synthetic:lots")
        with pytest.raises(DatasetError):
            synthetic_size("synthetic:-3")
        with pytest.raises(DatasetError):
            synthetic_size("real.jsonl")


class TestSyntheticSuite:
    def test_deterministic_and_seed_sensitive(self, two_arm_task):
        a = synthetic_suite(two_arm_task, 8, seed=0)
        b = synthetic_suite(two_arm_task, 8, seed=0)
        c = synthetic_suite(two_arm_task, 8, seed=1)
        assert [t.drifts for _, t in a] == [t.drifts for _, t in b]
        assert [t.drifts for _, t in a] != [t.drifts for _, t in c]

    def test_gold_matches_permuted_task(self, two_arm_task):
        for instance, task in synthetic_suite(two_arm_task, 16, seed=3):
            assert instance.gold_answer == task.gold_label
            assert sorted(task.drifts) == sorted(two_arm_task.drifts)

    def test_gold_varies_across_instances(self, two_arm_task):
        golds = {inst.gold_answer for inst, _ in synthetic_suite(two_arm_task, 32, seed=0)}
        assert golds == {"A", "B"}  # permutation actually moves the gold arm

    def test_ids_and_prompts(self, two_arm_task):
        suite = synthetic_suite(two_arm_task, 3, seed=0)
        assert [inst.id for inst, _ in suite] == ["syn-0000", "syn-0001", "syn-0002"]
        for inst, _ in suite:
            # The prompt must not collide with the generator's step grammar.
            assert "consider arm" not in inst.prompt
            assert "Answer:" not in inst.prompt

    def test_instance_task_permutation_is_indexed(self):
        base = SyntheticTask(arm_count=4, drifts=(0.4, 0.1, -0.1, -0.4),
                             noise_std=0.1, horizon=4)
        t0 = synthetic_instance_task(base, 0, 0)
        t0_again = synthetic_instance_task(base, 0, 0)
        t1 = synthetic_instance_task(base, 0, 1)
        assert t0.drifts == t0_again.drifts
        assert sorted(t1.drifts) == sorted(base.drifts)
