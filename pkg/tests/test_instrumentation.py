import pytest

from polychron.core.instrumentation import OpCounter, count, scoped


class TestOpCounter:
    def test_scopes_fold_into_the_total(self):
        counter = OpCounter()
        counter.add(comparisons=2)
        counter.scope("block0").add(rows_loaded=3)
        counter.scope("block0").scope("head0").add(rows_loaded=4, additions=5)
        totals = counter.total()
        assert totals["comparisons"] == 2
        assert totals["rows_loaded"] == 7
        assert totals["additions"] == 5
        assert counter.own()["rows_loaded"] == 0
        assert counter.find("block0/head0").additions == 5

    def test_scope_is_created_once(self):
        counter = OpCounter()
        assert counter.scope("ffn") is counter.scope("ffn")

    def test_unknown_count(self):
        with pytest.raises(KeyError):
            OpCounter().add(divisions=1)

    def test_missing_path(self):
        with pytest.raises(KeyError):
            OpCounter().find("block9")


class TestHelpers:
    def test_disabled_counter(self):
        count(None, "anything", comparisons=1)
        assert scoped(None, "head0") is None

    def test_count_into_scope(self):
        counter = OpCounter()
        count(counter, "unembedder", rows_loaded=2)
        count(counter, None, sign_tests=1)
        assert counter.children["unembedder"].rows_loaded == 2
        assert counter.sign_tests == 1
        assert scoped(counter, "unembedder") is counter.children["unembedder"]
